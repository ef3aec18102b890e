use serde::{Deserialize, Serialize};

use super::human::HumanSpec;
use super::shapes::Primitive;
use crate::geometry::SideLink;
use crate::model::{CameraIntrinsics, RigidTransform, Validate, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigSpec {
    pub camera_id: u16,
    pub position: [f64; 3],
    /// Heading of the optical axis about +z, degrees from +x.
    pub yaw_deg: f64,
    /// Downward tilt, degrees.
    #[serde(default)]
    pub pitch_deg: f64,
    #[serde(default)]
    pub intrinsics: Option<CameraIntrinsics>,
    /// Intervals `[start, end)` during which the lens is covered.
    #[serde(default)]
    pub cover: Vec<[f64; 2]>,
}

impl RigSpec {
    /// Camera-to-world transform. Camera axes: x right, y down, z forward.
    pub fn pose(&self) -> RigidTransform {
        let (sy, cy) = self.yaw_deg.to_radians().sin_cos();
        let (sp, cp) = self.pitch_deg.to_radians().sin_cos();
        let forward = Vec3::new(cy * cp, sy * cp, -sp);
        let right = Vec3::new(sy, -cy, 0.0);
        let down = forward.cross(&right);
        RigidTransform::new(
            nalgebra::Matrix3::from_columns(&[right, down, forward]),
            Vec3::from(self.position),
        )
    }

    pub fn is_covered(&self, t: f64) -> bool {
        self.cover.iter().any(|[a, b]| t >= *a && t < *b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceParams {
    pub p_hole: f64,
    #[serde(default = "default_angle")]
    pub angle_threshold_deg: f64,
}

fn default_angle() -> f64 {
    90.0
}

impl Default for InterferenceParams {
    fn default() -> Self {
        InterferenceParams {
            p_hole: 0.0,
            angle_threshold_deg: default_angle(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Suggested run length, seconds.
    #[serde(default)]
    pub duration_s: Option<f64>,
    /// Defaults for rigs without their own intrinsics.
    #[serde(default)]
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub interference: InterferenceParams,
    #[serde(default = "default_latency")]
    pub detection_latency: u32,
    #[serde(default)]
    pub room: Vec<Primitive>,
    pub rigs: Vec<RigSpec>,
    #[serde(default)]
    pub humans: Vec<HumanSpec>,
    /// Exit/entry side correspondences between cameras.
    #[serde(default)]
    pub side_links: Vec<SideLink>,
}

fn default_fps() -> f64 {
    30.0
}

fn default_latency() -> u32 {
    10
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene, String> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| e.to_string())?;
        scene.check()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(format!("fps must be positive, got {}", self.fps));
        }
        if !(0.0..=1.0).contains(&self.interference.p_hole) {
            return Err("p_hole must lie in [0, 1]".into());
        }
        let mut ids = Vec::new();
        for r in &self.rigs {
            if ids.contains(&r.camera_id) {
                return Err(format!("duplicate camera id {}", r.camera_id));
            }
            ids.push(r.camera_id);
            let intr = self.intrinsics_of(r);
            if let Some(v) = intr.violations().first() {
                return Err(format!("camera {}: {v}", r.camera_id));
            }
        }
        let mut hids = Vec::new();
        for h in &self.humans {
            h.check()?;
            if hids.contains(&h.id) {
                return Err(format!("duplicate human id {}", h.id));
            }
            hids.push(h.id);
        }
        for p in &self.room {
            if !p.shape.dimensions_valid() {
                return Err(format!("primitive with non-positive dimensions: {:?}", p.shape));
            }
        }
        Ok(())
    }

    pub fn intrinsics_of(&self, rig: &RigSpec) -> CameraIntrinsics {
        rig.intrinsics.unwrap_or(self.intrinsics)
    }

    pub fn rig(&self, camera_id: u16) -> Option<&RigSpec> {
        self.rigs.iter().find(|r| r.camera_id == camera_id)
    }

    pub fn time_of(&self, frame: u64) -> f64 {
        frame as f64 / self.fps
    }

    pub fn camera_ids(&self) -> Vec<u16> {
        self.rigs.iter().map(|r| r.camera_id).collect()
    }
}
