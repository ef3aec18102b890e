//! Synthetic depth sensors observing scripted people in a room.

mod detect;
mod human;
mod interference;
mod render;
mod scene;
mod shapes;

use std::collections::BTreeMap;
use std::path::Path;

pub use detect::{line_blocked, mix_seed, SkeletonDetector, Visible, JOINT_NOISE_M};
pub use human::{
    body_primitives, BodyPose, HumanSpec, PathSpec, Posture, PostureKey, Waypoint,
    POSTURE_TRANSITION_S,
};
pub use interference::{apply_interference, punch_holes, RigView};
pub use render::{render_frame, RayGrid, RenderedFrame, RigRenderer};
pub use scene::{InterferenceParams, RigSpec, Scene};
pub use shapes::{Primitive, Shape, Solid};

use crate::geometry::CalibrationSet;
use crate::model::{
    CameraIntrinsics, ColorFrame, DepthFrame, InputSkeleton, LabelFrame, RigidTransform, Vec3,
    JOINT_COUNT,
};

/// Everything one camera produces for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraOutput {
    pub camera_id: u16,
    pub frame: u64,
    pub time: f64,
    pub covered: bool,
    pub depth: DepthFrame,
    pub color: ColorFrame,
    pub labels: LabelFrame,
    pub skeletons: Vec<InputSkeleton>,
}

/// World-frame joints of one person.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub human_id: u8,
    pub joints: [Vec3; JOINT_COUNT],
}

/// Exact joints of every person present at `t`.
pub fn ground_truth(scene: &Scene, t: f64) -> Vec<GroundTruth> {
    scene
        .humans
        .iter()
        .filter(|h| h.is_present(t))
        .map(|h| GroundTruth {
            human_id: h.id,
            joints: h.joints_at(t),
        })
        .collect()
}

/// Solids of every person present at `t`.
pub fn human_solids(scene: &Scene, t: f64) -> Vec<Solid> {
    scene
        .humans
        .iter()
        .filter(|h| h.is_present(t))
        .flat_map(|h| body_primitives(h.id, h.height, &h.joints_at(t), h.color()))
        .map(|p| Solid::new(&p))
        .collect()
}

struct Rig {
    spec: RigSpec,
    intr: CameraIntrinsics,
    pose: RigidTransform,
    renderer: Option<RigRenderer>,
    detector: SkeletonDetector,
}

/// Steps a scene frame by frame for a subset of its cameras.
pub struct Simulator {
    scene: Scene,
    room: Vec<Solid>,
    rigs: Vec<Rig>,
    frame: u64,
}

impl Simulator {
    pub fn new(scene: Scene) -> Result<Simulator, String> {
        scene.check()?;
        let room: Vec<Solid> = scene.room.iter().map(Solid::new).collect();
        let rigs = scene
            .rigs
            .iter()
            .map(|r| Rig {
                spec: r.clone(),
                intr: scene.intrinsics_of(r),
                pose: r.pose(),
                renderer: None,
                detector: SkeletonDetector::new(r.camera_id, scene.detection_latency),
            })
            .collect();
        Ok(Simulator {
            scene,
            room,
            rigs,
            frame: 0,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Simulator, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Simulator::new(Scene::from_json(&text)?)
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    /// Index of the next frame to be produced.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn time(&self) -> f64 {
        self.scene.time_of(self.frame)
    }

    pub fn camera_ids(&self) -> Vec<u16> {
        self.scene.camera_ids()
    }

    /// Camera-to-world pose of every rig.
    pub fn world_poses(&self) -> BTreeMap<u16, RigidTransform> {
        self.rigs.iter().map(|r| (r.spec.camera_id, r.pose)).collect()
    }

    /// True calibration relative to the first rig.
    pub fn calibration_set(&self) -> CalibrationSet {
        let reference = self.rigs.first().map_or(0, |r| r.spec.camera_id);
        let mut set = CalibrationSet::new(reference);
        if let Some(first) = self.rigs.first() {
            let world_to_ref = first.pose.inverse();
            for r in &self.rigs[1..] {
                set.insert(r.spec.camera_id, world_to_ref.compose(&r.pose));
            }
        }
        set
    }

    pub fn ground_truth(&self) -> Vec<GroundTruth> {
        ground_truth(&self.scene, self.time())
    }

    fn selected(&self, cameras: Option<&[u16]>) -> Vec<usize> {
        (0..self.rigs.len())
            .filter(|&i| cameras.is_none_or(|c| c.contains(&self.rigs[i].spec.camera_id)))
            .collect()
    }

    /// Renders and detects the current frame for the listed cameras (all when
    /// `None`), then advances the clock.
    pub fn step(&mut self, cameras: Option<&[u16]>) -> Vec<CameraOutput> {
        let frame = self.frame;
        let t = self.time();
        let picked = self.selected(cameras);
        let movers = human_solids(&self.scene, t);
        let mut frames: Vec<RenderedFrame> = Vec::with_capacity(picked.len());
        for &i in &picked {
            let rig = &mut self.rigs[i];
            if rig.spec.is_covered(t) {
                frames.push(RenderedFrame::blank(&rig.intr));
                continue;
            }
            let room = &self.room;
            let renderer = rig
                .renderer
                .get_or_insert_with(|| RigRenderer::new(rig.pose, rig.intr, room));
            frames.push(renderer.render(&movers));
        }

        // Interference depends on every uncovered rig, simulated here or not.
        let active: Vec<usize> = (0..self.rigs.len())
            .filter(|&i| !self.rigs[i].spec.is_covered(t))
            .collect();
        let views: Vec<RigView> = active
            .iter()
            .map(|&i| RigView {
                camera_id: self.rigs[i].spec.camera_id,
                pose: &self.rigs[i].pose,
                intrinsics: &self.rigs[i].intr,
            })
            .collect();
        for (k, &i) in picked.iter().enumerate() {
            let me = self.rigs[i].spec.camera_id;
            if let Some(pos) = views.iter().position(|v| v.camera_id == me) {
                punch_holes(&mut frames[k], pos, &views, &self.scene.interference, self.scene.seed, frame);
            }
        }

        let skeletons = self.detect(&picked, t, frame, &movers);
        self.frame += 1;
        picked
            .iter()
            .zip(frames)
            .zip(skeletons)
            .map(|((&i, f), skeletons)| CameraOutput {
                camera_id: self.rigs[i].spec.camera_id,
                frame,
                time: t,
                covered: self.rigs[i].spec.is_covered(t),
                depth: f.depth,
                color: f.color,
                labels: f.labels,
                skeletons,
            })
            .collect()
    }

    /// Runs only skeleton detection for the current frame, then advances.
    pub fn step_skeletons(&mut self, cameras: Option<&[u16]>) -> Vec<(u16, Vec<InputSkeleton>)> {
        let frame = self.frame;
        let t = self.time();
        let picked = self.selected(cameras);
        let movers = human_solids(&self.scene, t);
        let out = self.detect(&picked, t, frame, &movers);
        self.frame += 1;
        picked
            .iter()
            .map(|&i| self.rigs[i].spec.camera_id)
            .zip(out)
            .collect()
    }

    fn detect(&mut self, picked: &[usize], t: f64, frame: u64, movers: &[Solid]) -> Vec<Vec<InputSkeleton>> {
        let truth = ground_truth(&self.scene, t);
        let visible: Vec<Visible> = truth
            .iter()
            .map(|g| Visible {
                human_id: g.human_id,
                joints: &g.joints,
            })
            .collect();
        let blockers: Vec<&Solid> = self.room.iter().chain(movers.iter()).collect();
        picked
            .iter()
            .map(|&i| {
                let rig = &mut self.rigs[i];
                if rig.spec.is_covered(t) {
                    rig.detector.clear();
                    return Vec::new();
                }
                rig.detector
                    .observe(&rig.pose, &rig.intr, frame, self.scene.seed, &visible, &blockers)
            })
            .collect()
    }
}
