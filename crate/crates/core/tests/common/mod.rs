#![allow(dead_code)]

use std::collections::BTreeMap;

use depthgrid::fusion::{track_center, FusionParams, Tracker};
use depthgrid::model::{InputSkeleton, OutputSkeleton, TrackState, Vec3};
use depthgrid::sim::{GroundTruth, Scene, Simulator};

pub fn scene_path(name: &str) -> String {
    format!("{}/scenes/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn load_scene(name: &str) -> Scene {
    Scene::from_json(&std::fs::read_to_string(scene_path(name)).unwrap()).unwrap()
}

pub struct FrameLog {
    pub frame: u64,
    pub truth: Vec<GroundTruth>,
    pub inputs: Vec<InputSkeleton>,
    pub outputs: Vec<OutputSkeleton>,
}

impl FrameLog {
    pub fn confirmed(&self) -> impl Iterator<Item = &OutputSkeleton> {
        self.outputs.iter().filter(|o| o.state == TrackState::Confirmed)
    }
}

/// Runs skeleton detection and fusion over a scene, using the true rig poses
/// as calibration.
pub fn run_scenario(scene: Scene, frames: u64, params: FusionParams) -> Vec<FrameLog> {
    let links = scene.side_links.clone();
    let mut sim = Simulator::new(scene).unwrap();
    let calib = sim.world_poses();
    let mut tracker = Tracker::new(params).unwrap().with_side_links(links);
    (0..frames)
        .map(|frame| {
            let truth = sim.ground_truth();
            let inputs: Vec<InputSkeleton> = sim.step_skeletons(None).into_iter().flat_map(|(_, s)| s).collect();
            let outputs = tracker.ingest_frame(&inputs, &calib).unwrap();
            FrameLog {
                frame,
                truth,
                inputs,
                outputs,
            }
        })
        .collect()
}

/// The true person nearest each confirmed output.
pub fn assign(log: &FrameLog) -> BTreeMap<u32, (u8, f64)> {
    log.confirmed()
        .map(|o| {
            let com = track_center(&o.joints);
            let (human, d) = log
                .truth
                .iter()
                .map(|g| {
                    let truth_com = g.joints.iter().sum::<Vec3>() / g.joints.len() as f64;
                    (g.human_id, (truth_com - com).norm())
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            (o.output_id, (human, d))
        })
        .collect()
}

/// Counts changes of the person an output follows, or of the output a
/// person is followed by, after the first assignment of each.
pub fn identity_swaps(logs: &[FrameLog]) -> usize {
    let mut by_output: BTreeMap<u32, u8> = BTreeMap::new();
    let mut by_human: BTreeMap<u8, u32> = BTreeMap::new();
    let mut swaps = 0;
    for log in logs {
        for (id, (human, _)) in assign(log) {
            if by_output.insert(id, human).is_some_and(|h| h != human) {
                swaps += 1;
            }
            if by_human.insert(human, id).is_some_and(|o| o != id) {
                swaps += 1;
            }
        }
    }
    swaps
}
