//! Merging per-camera skeletons into labeled, tracked people.

mod matching;
mod tracker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matching::{average_joints, match_candidates, paired_com_distance, track_center, MatchReport, Motion};
pub use tracker::{handoff, sides_correspond, LostTrack, NewInput, TraceRecord, Tracker};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("no calibration for camera {0}")]
    MissingCalibration(u16),
    #[error("invalid fusion parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionParams {
    /// Meters.
    pub com_distance_threshold: f64,
    pub velocity_angle_threshold_deg: f64,
    /// Meters per frame.
    pub velocity_magnitude_tolerance: f64,
    /// Frames a match must hold before it takes effect.
    pub confirmation_window: u32,
    /// Frames a lost output is kept.
    pub lost_retention: u32,
    pub joint_confidence_floor: f64,
    pub history_capacity: usize,
    /// Below this speed (meters per frame) on both sides the angle test is
    /// skipped.
    pub near_stationary_speed: f64,
    /// Samples needed before velocity conditions apply.
    pub min_velocity_history: usize,
    /// Samples a newly seen input collects before a handoff is decided.
    pub handoff_settle_frames: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            com_distance_threshold: 0.15,
            velocity_angle_threshold_deg: 30.0,
            velocity_magnitude_tolerance: 0.05,
            confirmation_window: 15,
            lost_retention: 15,
            joint_confidence_floor: 0.5,
            history_capacity: 30,
            near_stationary_speed: 0.005,
            min_velocity_history: 2,
            handoff_settle_frames: 5,
        }
    }
}

impl FusionParams {
    pub fn check(&self) -> Result<(), FusionError> {
        let positive = [
            ("com_distance_threshold", self.com_distance_threshold),
            ("velocity_angle_threshold_deg", self.velocity_angle_threshold_deg),
            ("velocity_magnitude_tolerance", self.velocity_magnitude_tolerance),
            ("near_stationary_speed", self.near_stationary_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FusionError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.confirmation_window == 0 || self.lost_retention == 0 {
            return Err(FusionError::InvalidParams("windows must be at least one frame".into()));
        }
        if !(self.joint_confidence_floor > 0.0 && self.joint_confidence_floor < 1.0) {
            return Err(FusionError::InvalidParams(format!(
                "joint_confidence_floor must lie in (0, 1), got {}",
                self.joint_confidence_floor
            )));
        }
        if self.history_capacity < 2 || self.min_velocity_history < 2 {
            return Err(FusionParams::bad("history sizes must be at least 2"));
        }
        if self.handoff_settle_frames == 0 || self.handoff_settle_frames > self.history_capacity {
            return Err(FusionParams::bad("handoff_settle_frames must lie in [1, history_capacity]"));
        }
        Ok(())
    }

    fn bad(msg: &str) -> FusionError {
        FusionError::InvalidParams(msg.into())
    }
}
