use serde::{Deserialize, Serialize};

use super::shapes::{Primitive, Shape};
use crate::model::{JointKind, Vec3, JOINT_COUNT};

/// Height the joint templates are drawn at.
const TEMPLATE_HEIGHT: f64 = 1.75;
/// Seconds to blend between postures.
pub const POSTURE_TRANSITION_S: f64 = 1.0;

// Body frame: x forward, y to the figure's left, z up, feet on the floor.
// Order follows `JointKind::ALL`.
const STAND: [[f64; 3]; JOINT_COUNT] = [
    [0.0, 0.0, 1.62],
    [0.0, 0.0, 1.48],
    [0.0, 0.0, 1.20],
    [0.0, 0.19, 1.43],
    [0.0, 0.22, 1.15],
    [0.0, 0.23, 0.88],
    [0.0, -0.19, 1.43],
    [0.0, -0.22, 1.15],
    [0.0, -0.23, 0.88],
    [0.0, 0.10, 0.95],
    [0.0, 0.11, 0.52],
    [0.0, 0.11, 0.08],
    [0.0, -0.10, 0.95],
    [0.0, -0.11, 0.52],
    [0.0, -0.11, 0.08],
];

const SIT: [[f64; 3]; JOINT_COUNT] = [
    [-0.05, 0.0, 1.17],
    [-0.05, 0.0, 1.03],
    [-0.05, 0.0, 0.75],
    [-0.05, 0.19, 0.98],
    [0.05, 0.22, 0.72],
    [0.28, 0.20, 0.66],
    [-0.05, -0.19, 0.98],
    [0.05, -0.22, 0.72],
    [0.28, -0.20, 0.66],
    [0.0, 0.10, 0.50],
    [0.45, 0.11, 0.52],
    [0.47, 0.11, 0.08],
    [0.0, -0.10, 0.50],
    [0.45, -0.11, 0.52],
    [0.47, -0.11, 0.08],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Posture {
    Stand,
    Sit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostureKey {
    pub time: f64,
    pub posture: Posture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pos: [f64; 2],
    #[serde(default)]
    pub dwell: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathSpec {
    Waypoints {
        points: Vec<Waypoint>,
        #[serde(default)]
        speed: f64,
        /// Initial heading; defaults to facing the second waypoint.
        #[serde(default)]
        facing_deg: Option<f64>,
    },
    Orbit {
        center: [f64; 2],
        radius: f64,
        /// Tangential speed, m/s; negative orbits clockwise.
        speed: f64,
        #[serde(default)]
        start_deg: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanSpec {
    pub id: u8,
    pub height: f64,
    pub path: PathSpec,
    #[serde(default)]
    pub postures: Vec<PostureKey>,
    /// Time interval `[start, end)` the figure exists in the scene.
    #[serde(default)]
    pub present: Option<[f64; 2]>,
    #[serde(default)]
    pub color: Option<[u8; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPose {
    pub position: [f64; 2],
    pub heading: f64,
    /// 0 standing, 1 seated.
    pub sit: f64,
}

impl HumanSpec {
    pub fn check(&self) -> Result<(), String> {
        if !(1..=15).contains(&self.id) {
            return Err(format!("human id {} outside [1, 15]", self.id));
        }
        if !(1.4..=2.1).contains(&self.height) {
            return Err(format!("human {} height {} outside [1.4, 2.1] m", self.id, self.height));
        }
        let speed = match &self.path {
            PathSpec::Waypoints { points, speed, .. } => {
                if points.is_empty() {
                    return Err(format!("human {} has no waypoints", self.id));
                }
                *speed
            }
            PathSpec::Orbit { radius, speed, .. } => {
                if *radius <= 0.0 {
                    return Err(format!("human {} orbit radius must be positive", self.id));
                }
                speed.abs()
            }
        };
        if !(0.0..=2.5).contains(&speed) {
            return Err(format!("human {} speed {speed} outside [0, 2.5] m/s", self.id));
        }
        Ok(())
    }

    pub fn is_present(&self, t: f64) -> bool {
        self.present.is_none_or(|[a, b]| t >= a && t < b)
    }

    pub fn pose_at(&self, t: f64) -> BodyPose {
        let (position, heading) = match &self.path {
            PathSpec::Waypoints { points, speed, facing_deg } => walk(points, *speed, *facing_deg, t),
            PathSpec::Orbit { center, radius, speed, start_deg } => {
                let angle = start_deg.to_radians() + speed * t / radius;
                let (s, c) = angle.sin_cos();
                let heading = angle + speed.signum() * std::f64::consts::FRAC_PI_2;
                ([center[0] + radius * c, center[1] + radius * s], heading)
            }
        };
        BodyPose {
            position,
            heading,
            sit: self.sit_weight(t),
        }
    }

    fn sit_weight(&self, t: f64) -> f64 {
        let mut keys = self.postures.clone();
        keys.sort_by(|a, b| a.time.total_cmp(&b.time));
        let target = |p: Posture| if p == Posture::Sit { 1.0 } else { 0.0 };
        let mut weight = 0.0;
        for k in keys.iter().filter(|k| k.time <= t) {
            let goal = target(k.posture);
            let f = ((t - k.time) / POSTURE_TRANSITION_S).min(1.0);
            weight += (goal - weight) * f;
        }
        weight
    }

    /// World-frame joints (z up) at time `t`, ignoring presence.
    pub fn joints_at(&self, t: f64) -> [Vec3; JOINT_COUNT] {
        let pose = self.pose_at(t);
        let scale = self.height / TEMPLATE_HEIGHT;
        let (s, c) = pose.heading.sin_cos();
        std::array::from_fn(|i| {
            let [sx, sy, sz] = STAND[i];
            let [tx, ty, tz] = SIT[i];
            let w = pose.sit;
            let local = Vec3::new(sx + (tx - sx) * w, sy + (ty - sy) * w, sz + (tz - sz) * w) * scale;
            Vec3::new(
                pose.position[0] + c * local.x - s * local.y,
                pose.position[1] + s * local.x + c * local.y,
                local.z,
            )
        })
    }

    pub fn color(&self) -> [u8; 3] {
        self.color.unwrap_or(PALETTE[self.id as usize % PALETTE.len()])
    }
}

const PALETTE: [[u8; 3]; 6] = [
    [200, 60, 60],
    [60, 160, 70],
    [60, 90, 200],
    [210, 170, 40],
    [150, 70, 180],
    [40, 170, 170],
];

fn walk(points: &[Waypoint], speed: f64, facing_deg: Option<f64>, t: f64) -> ([f64; 2], f64) {
    let p = |i: usize| Vec3::new(points[i].pos[0], points[i].pos[1], 0.0);
    let heading_of = |v: Vec3| v.y.atan2(v.x);
    let mut heading = facing_deg.map(f64::to_radians).unwrap_or_else(|| {
        if points.len() > 1 {
            heading_of(p(1) - p(0))
        } else {
            0.0
        }
    });
    let mut clock = 0.0;
    for i in 0..points.len() {
        clock += points[i].dwell.max(0.0);
        if t < clock || i + 1 == points.len() || speed <= 0.0 {
            let here = p(i);
            return ([here.x, here.y], heading);
        }
        let seg = p(i + 1) - p(i);
        let len = seg.norm();
        if len > 0.0 {
            heading = heading_of(seg);
        }
        let dt = len / speed;
        if t < clock + dt {
            let at = p(i) + seg * ((t - clock) / dt);
            return ([at.x, at.y], heading);
        }
        clock += dt;
    }
    unreachable!("loop returns at the last waypoint")
}

const HEAD_RADIUS: f64 = 0.11;

/// Capsules and a sphere approximating the body, owned by the human.
pub fn body_primitives(id: u8, height: f64, joints: &[Vec3; JOINT_COUNT], color: [u8; 3]) -> Vec<Primitive> {
    use JointKind::*;
    let s = height / TEMPLATE_HEIGHT;
    let j = |k: JointKind| joints[k.index()];
    let mid_hip = (j(LeftHip) + j(RightHip)) / 2.0;
    let segments: [(Vec3, Vec3, f64); 12] = [
        (j(Neck), mid_hip, 0.15),
        (j(LeftShoulder), j(RightShoulder), 0.06),
        (j(LeftShoulder), j(LeftElbow), 0.05),
        (j(LeftElbow), j(LeftHand), 0.045),
        (j(RightShoulder), j(RightElbow), 0.05),
        (j(RightElbow), j(RightHand), 0.045),
        (j(LeftHip), j(LeftKnee), 0.075),
        (j(LeftKnee), j(LeftFoot), 0.06),
        (j(RightHip), j(RightKnee), 0.075),
        (j(RightKnee), j(RightFoot), 0.06),
        (j(Neck), j(Head), 0.05),
        (j(LeftHip), j(RightHip), 0.08),
    ];
    let mut out: Vec<Primitive> = segments
        .iter()
        .map(|(a, b, r)| Primitive {
            shape: Shape::Capsule { a: (*a).into(), b: (*b).into(), radius: r * s },
            color,
            owner: Some(id),
        })
        .collect();
    out.push(Primitive {
        shape: Shape::Sphere { center: j(Head).into(), radius: HEAD_RADIUS * s },
        color,
        owner: Some(id),
    });
    out
}
