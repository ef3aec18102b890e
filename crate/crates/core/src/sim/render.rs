use super::shapes::Solid;
use crate::model::{CameraIntrinsics, ColorFrame, DepthFrame, LabelFrame, RigidTransform, Vec3};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedFrame {
    pub depth: DepthFrame,
    pub color: ColorFrame,
    pub labels: LabelFrame,
}

impl RenderedFrame {
    /// What a covered lens reports.
    pub fn blank(intr: &CameraIntrinsics) -> RenderedFrame {
        RenderedFrame {
            depth: DepthFrame::zeros(intr.width, intr.height),
            color: ColorFrame::black(intr.width, intr.height),
            labels: LabelFrame::zeros(intr.width, intr.height),
        }
    }
}

/// Per-pixel unit rays of a rig, in world and camera frames.
#[derive(Debug, Clone)]
pub struct RayGrid {
    pub origin: Vec3,
    pub world: Vec<Vec3>,
    /// Camera-frame forward component of each unit ray.
    pub forward: Vec<f64>,
}

impl RayGrid {
    pub fn new(pose: &RigidTransform, intr: &CameraIntrinsics) -> RayGrid {
        let (fx, fy, cx, cy) = (intr.fx(), intr.fy(), intr.cx(), intr.cy());
        let n = intr.width * intr.height;
        let mut world = Vec::with_capacity(n);
        let mut forward = Vec::with_capacity(n);
        for v in 0..intr.height {
            for u in 0..intr.width {
                let d = Vec3::new((u as f64 - cx) / fx, (v as f64 - cy) / fy, 1.0).normalize();
                forward.push(d.z);
                world.push(pose.rotation * d);
            }
        }
        RayGrid {
            origin: pose.translation,
            world,
            forward,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    dist: f64,
    color: [u8; 3],
    owner: Option<u8>,
}

const MISS: Hit = Hit {
    dist: f64::INFINITY,
    color: [0, 0, 0],
    owner: None,
};

fn nearest(hit: &mut Hit, solid: &Solid, o: &Vec3, d: &Vec3) {
    if let Some(t) = solid.intersect(o, d) {
        if t < hit.dist {
            *hit = Hit {
                dist: t,
                color: solid.color,
                owner: solid.owner,
            };
        }
    }
}

fn shade(hits: &[Hit], rays: &RayGrid, intr: &CameraIntrinsics) -> RenderedFrame {
    let mut out = RenderedFrame::blank(intr);
    let (lo, hi) = (intr.min_range_mm as f64, intr.max_range_mm as f64);
    for (i, h) in hits.iter().enumerate() {
        if !h.dist.is_finite() {
            continue;
        }
        out.color.data[i] = h.color;
        let mm = (h.dist * rays.forward[i] * 1000.0).round();
        if mm >= lo && mm <= hi {
            out.depth.data[i] = mm as u16;
            out.labels.data[i] = h.owner.unwrap_or(0);
        }
    }
    out
}

/// Casts every pixel against every solid.
pub fn render_frame(
    pose: &RigidTransform,
    intr: &CameraIntrinsics,
    solids: &[&Solid],
) -> RenderedFrame {
    let rays = RayGrid::new(pose, intr);
    let hits: Vec<Hit> = rays
        .world
        .iter()
        .map(|d| {
            let mut h = MISS;
            for s in solids {
                nearest(&mut h, s, &rays.origin, d);
            }
            h
        })
        .collect();
    shade(&hits, &rays, intr)
}

/// Renders one rig repeatedly, reusing the static room and only casting
/// moving solids inside their screen-space bounds.
#[derive(Debug, Clone)]
pub struct RigRenderer {
    pose: RigidTransform,
    to_camera: RigidTransform,
    intr: CameraIntrinsics,
    rays: RayGrid,
    room: Vec<Hit>,
}

impl RigRenderer {
    pub fn new(pose: RigidTransform, intr: CameraIntrinsics, room: &[Solid]) -> RigRenderer {
        let rays = RayGrid::new(&pose, &intr);
        let room_hits = rays
            .world
            .iter()
            .map(|d| {
                let mut h = MISS;
                for s in room {
                    nearest(&mut h, s, &rays.origin, d);
                }
                h
            })
            .collect();
        RigRenderer {
            to_camera: pose.inverse(),
            pose,
            intr,
            rays,
            room: room_hits,
        }
    }

    pub fn pose(&self) -> &RigidTransform {
        &self.pose
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intr
    }

    pub fn render(&self, movers: &[Solid]) -> RenderedFrame {
        let mut hits = self.room.clone();
        let w = self.intr.width;
        for s in movers {
            let Some((u0, u1, v0, v1)) = self.screen_bounds(s) else {
                continue;
            };
            for v in v0..=v1 {
                for u in u0..=u1 {
                    let i = v * w + u;
                    nearest(&mut hits[i], s, &self.rays.origin, &self.rays.world[i]);
                }
            }
        }
        shade(&hits, &self.rays, &self.intr)
    }

    /// Inclusive pixel rectangle covering the solid's bounding sphere.
    fn screen_bounds(&self, s: &Solid) -> Option<(usize, usize, usize, usize)> {
        let (w, h) = (self.intr.width, self.intr.height);
        if w == 0 || h == 0 {
            return None;
        }
        let c = self.to_camera.apply(&s.bound_center);
        let r = s.bound_radius;
        if c.z + r <= 0.0 {
            return None;
        }
        if c.z - r <= 1e-6 {
            return Some((0, w - 1, 0, h - 1));
        }
        // Over the box [c - r, c + r] with positive depth, x/z and y/z reach
        // their extremes at corners.
        let ratios = |a: f64| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for na in [a - r, a + r] {
                for nz in [c.z - r, c.z + r] {
                    let q = na / nz;
                    lo = lo.min(q);
                    hi = hi.max(q);
                }
            }
            (lo, hi)
        };
        let (xl, xh) = ratios(c.x);
        let (yl, yh) = ratios(c.y);
        let span = |lo: f64, hi: f64, f: f64, center: f64, n: usize| {
            let a = (center + f * lo).floor() - 1.0;
            let b = (center + f * hi).ceil() + 1.0;
            if b < 0.0 || a > (n - 1) as f64 {
                None
            } else {
                Some((a.max(0.0) as usize, b.min((n - 1) as f64) as usize))
            }
        };
        let (u0, u1) = span(xl, xh, self.intr.fx(), self.intr.cx(), w)?;
        let (v0, v1) = span(yl, yh, self.intr.fy(), self.intr.cy(), h)?;
        Some((u0, u1, v0, v1))
    }
}
