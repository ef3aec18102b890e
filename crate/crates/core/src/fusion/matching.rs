use serde::{Deserialize, Serialize};

use super::FusionParams;
use crate::model::{Joint, JointKind, JointSet, Vec3, JOINT_COUNT};

/// Fewest joints both skeletons must see confidently before their centers
/// are compared on the shared joints only.
const MIN_SHARED_JOINTS: usize = 3;

/// Unweighted mean of all joint positions. Tracks use it for their center
/// history because it does not jump when a joint's confidence crosses the
/// floor.
pub fn track_center(joints: &JointSet) -> Vec3 {
    joints.iter().map(|j| j.position).sum::<Vec3>() / JOINT_COUNT as f64
}

/// Distance between the centers of two skeletons, measured over the joints
/// both report at or above the confidence floor so that a joint one camera
/// cannot see does not shift one center and not the other.
pub fn paired_com_distance(a: &JointSet, b: &JointSet, floor: f64) -> f64 {
    let mut sum_a = Vec3::zeros();
    let mut sum_b = Vec3::zeros();
    let mut n = 0usize;
    for i in 0..JOINT_COUNT {
        if a[i].confidence >= floor && b[i].confidence >= floor {
            sum_a += a[i].position;
            sum_b += b[i].position;
            n += 1;
        }
    }
    if n >= MIN_SHARED_JOINTS {
        (sum_a - sum_b).norm() / n as f64
    } else {
        (track_center(a) - track_center(b)).norm()
    }
}

/// Which merge conditions held for one output/input pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub com_distance: f64,
    pub distance_ok: bool,
    /// `None` when the angle was not evaluated (too little history, or both
    /// nearly stationary).
    pub angle_deg: Option<f64>,
    pub angle_ok: bool,
    pub magnitude_ok: bool,
}

impl MatchReport {
    pub fn satisfied(&self) -> bool {
        self.distance_ok && self.angle_ok && self.magnitude_ok
    }
}

/// Motion summary of one side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    /// Meters per frame.
    pub velocity: Vec3,
    /// Number of center-of-mass samples behind the estimate.
    pub samples: usize,
}

/// Evaluates the distance and velocity conditions between an output and an
/// input, both in the common frame. Velocity conditions hold vacuously while
/// either side has fewer than `params.min_velocity_history` samples.
pub fn match_candidates(
    output: &JointSet,
    output_motion: Motion,
    input: &JointSet,
    input_motion: Motion,
    params: &FusionParams,
) -> MatchReport {
    let com_distance = paired_com_distance(output, input, params.joint_confidence_floor);
    let distance_ok = com_distance < params.com_distance_threshold;
    let (angle_deg, angle_ok, magnitude_ok) = velocity_conditions(output_motion, input_motion, params);
    MatchReport {
        com_distance,
        distance_ok,
        angle_deg,
        angle_ok,
        magnitude_ok,
    }
}

pub(crate) fn velocity_conditions(a: Motion, b: Motion, params: &FusionParams) -> (Option<f64>, bool, bool) {
    let bootstrap = a.samples < params.min_velocity_history || b.samples < params.min_velocity_history;
    if bootstrap {
        return (None, true, true);
    }
    let (na, nb) = (a.velocity.norm(), b.velocity.norm());
    let magnitude_ok = (na - nb).abs() < params.velocity_magnitude_tolerance;
    if na < params.near_stationary_speed && nb < params.near_stationary_speed {
        return (None, true, magnitude_ok);
    }
    let angle = if na == 0.0 || nb == 0.0 {
        180.0
    } else {
        (a.velocity.dot(&b.velocity) / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
    };
    (Some(angle), angle < params.velocity_angle_threshold_deg, magnitude_ok)
}

/// Fuses contributor joints kind by kind: the mean over contributors at or
/// above the floor, or the single most confident estimate when none is.
pub fn average_joints(contributors: &[&JointSet], floor: f64) -> JointSet {
    assert!(!contributors.is_empty(), "averaging needs a contributor");
    std::array::from_fn(|i| {
        let kind = JointKind::ALL[i];
        let good: Vec<&Joint> = contributors
            .iter()
            .map(|s| &s[i])
            .filter(|j| j.confidence >= floor)
            .collect();
        if good.is_empty() {
            let best = contributors
                .iter()
                .map(|s| &s[i])
                .fold(None::<&Joint>, |acc, j| match acc {
                    Some(b) if b.confidence >= j.confidence => Some(b),
                    _ => Some(j),
                })
                .expect("non-empty");
            return Joint::new(kind, best.position, best.confidence);
        }
        let n = good.len() as f64;
        let position = good.iter().map(|j| j.position).sum::<Vec3>() / n;
        let confidence = good.iter().map(|j| j.confidence).sum::<f64>() / n;
        Joint::new(kind, position, confidence)
    })
}
