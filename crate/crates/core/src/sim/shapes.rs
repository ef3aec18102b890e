use serde::{Deserialize, Serialize};

use crate::model::Vec3;

/// Hits closer than this to the ray origin are ignored.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned in its own frame, rotated by `yaw_deg` about +z.
    Box {
        center: [f64; 3],
        size: [f64; 3],
        #[serde(default)]
        yaw_deg: f64,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Capsule {
        a: [f64; 3],
        b: [f64; 3],
        radius: f64,
    },
}

impl Shape {
    pub fn dimensions_valid(&self) -> bool {
        match self {
            Shape::Box { size, .. } => size.iter().all(|s| *s > 0.0 && s.is_finite()),
            Shape::Sphere { radius, .. } | Shape::Capsule { radius, .. } => {
                *radius > 0.0 && radius.is_finite()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    #[serde(default = "default_color")]
    pub color: [u8; 3],
    /// Human id owning this primitive, for labels and self-occlusion.
    #[serde(default)]
    pub owner: Option<u8>,
}

fn default_color() -> [u8; 3] {
    [180, 180, 180]
}

/// A shape prepared for repeated ray queries.
#[derive(Debug, Clone)]
pub struct Solid {
    kind: SolidKind,
    pub color: [u8; 3],
    pub owner: Option<u8>,
    pub bound_center: Vec3,
    pub bound_radius: f64,
}

#[derive(Debug, Clone)]
enum SolidKind {
    Box { center: Vec3, half: Vec3, cos: f64, sin: f64 },
    Sphere { center: Vec3, r2: f64 },
    Capsule { a: Vec3, b: Vec3, ba: Vec3, baba: f64, r2: f64 },
}

impl Solid {
    pub fn new(p: &Primitive) -> Solid {
        let (kind, bound_center, bound_radius) = match &p.shape {
            Shape::Box { center, size, yaw_deg } => {
                let c = Vec3::from(*center);
                let half = Vec3::from(*size) / 2.0;
                let (sin, cos) = yaw_deg.to_radians().sin_cos();
                (SolidKind::Box { center: c, half, cos, sin }, c, half.norm())
            }
            Shape::Sphere { center, radius } => {
                let c = Vec3::from(*center);
                (SolidKind::Sphere { center: c, r2: radius * radius }, c, *radius)
            }
            Shape::Capsule { a, b, radius } => {
                let (a, b) = (Vec3::from(*a), Vec3::from(*b));
                let ba = b - a;
                (
                    SolidKind::Capsule { a, b, ba, baba: ba.norm_squared(), r2: radius * radius },
                    (a + b) / 2.0,
                    ba.norm() / 2.0 + radius,
                )
            }
        };
        Solid {
            kind,
            color: p.color,
            owner: p.owner,
            bound_center,
            bound_radius,
        }
    }

    /// Distance along the unit direction `d` from `o` to the first surface
    /// in front of the origin.
    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        match &self.kind {
            SolidKind::Sphere { center, r2 } => sphere_hit(&(o - center), d, *r2),
            SolidKind::Box { center, half, cos, sin } => {
                let rel = o - center;
                // Rotate into the box frame (by -yaw).
                let lo = Vec3::new(cos * rel.x + sin * rel.y, -sin * rel.x + cos * rel.y, rel.z);
                let ld = Vec3::new(cos * d.x + sin * d.y, -sin * d.x + cos * d.y, d.z);
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for i in 0..3 {
                    if ld[i].abs() < 1e-15 {
                        if lo[i].abs() > half[i] {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / ld[i];
                    let (mut a, mut b) = ((-half[i] - lo[i]) * inv, (half[i] - lo[i]) * inv);
                    if a > b {
                        std::mem::swap(&mut a, &mut b);
                    }
                    t0 = t0.max(a);
                    t1 = t1.min(b);
                    if t0 > t1 {
                        return None;
                    }
                }
                (t0 > EPS).then_some(t0)
            }
            SolidKind::Capsule { a, b, ba, baba, r2 } => {
                let oa = o - a;
                let bard = ba.dot(d);
                let baoa = ba.dot(&oa);
                let rdoa = d.dot(&oa);
                let oaoa = oa.norm_squared();
                let k2 = baba - bard * bard;
                let k1 = baba * rdoa - baoa * bard;
                let k0 = baba * oaoa - baoa * baoa - r2 * baba;
                if k2 > 1e-12 {
                    let h = k1 * k1 - k2 * k0;
                    if h < 0.0 {
                        return None;
                    }
                    let t = (-k1 - h.sqrt()) / k2;
                    let y = baoa + t * bard;
                    if y > 0.0 && y < *baba {
                        return (t > EPS).then_some(t);
                    }
                    let oc = if y <= 0.0 { oa } else { o - b };
                    return sphere_hit(&oc, d, *r2);
                }
                // Ray parallel to the axis: only the end caps can be hit first.
                let ta = sphere_hit(&oa, d, *r2);
                let tb = sphere_hit(&(o - b), d, *r2);
                match (ta, tb) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }
}

fn sphere_hit(oc: &Vec3, d: &Vec3, r2: f64) -> Option<f64> {
    let b = oc.dot(d);
    let c = oc.norm_squared() - r2;
    let h = b * b - c;
    if h < 0.0 {
        return None;
    }
    let t = -b - h.sqrt();
    (t > EPS).then_some(t)
}
