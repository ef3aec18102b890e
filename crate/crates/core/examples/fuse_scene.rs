//! Runs skeleton fusion offline over a simulated scene and prints how the
//! tracked people evolve.
//!
//! cargo run --example fuse_scene -- [scene.json]

use depthgrid::fusion::{track_center, FusionParams, Tracker};
use depthgrid::model::{InputSkeleton, TrackState};
use depthgrid::sim::Simulator;

fn main() {
    let scene = std::env::args()
        .nth(1)
        .unwrap_or_else(|| format!("{}/scenes/cover.json", env!("CARGO_MANIFEST_DIR")));
    let mut sim = Simulator::from_file(&scene).expect("scene");
    let calibration = sim.world_poses();
    let frames = (sim.scene().duration_s.unwrap_or(10.0) * sim.scene().fps) as u64;
    let covers: Vec<(u16, [f64; 2])> = sim.scene().rigs.iter().flat_map(|r| r.cover.iter().map(|c| (r.camera_id, *c))).collect();
    let mut tracker = Tracker::new(FusionParams::default())
        .expect("params")
        .with_side_links(sim.scene().side_links.clone());

    for frame in 0..frames {
        let t = sim.time();
        let inputs: Vec<InputSkeleton> = sim.step_skeletons(None).into_iter().flat_map(|(_, s)| s).collect();
        let outputs = tracker.ingest_frame(&inputs, &calibration).expect("calibrated");
        if frame == 60 {
            for o in outputs.iter().filter(|o| o.state == TrackState::Confirmed) {
                tracker.set_label(o.output_id, format!("guest {}", o.output_id));
            }
        }
        if frame % 60 == 0 {
            let covered: Vec<u16> = covers.iter().filter(|(_, [a, b])| t >= *a && t < *b).map(|c| c.0).collect();
            println!("t={t:5.1}s inputs={:2} covered={covered:?}", inputs.len());
            for o in tracker.outputs() {
                let c = track_center(&o.joints);
                println!(
                    "    {:>3} {:<9} {:?} at ({:5.2}, {:5.2}) from {} camera(s)",
                    o.output_id,
                    o.label,
                    o.state,
                    c.x,
                    c.y,
                    o.contributors.len()
                );
            }
        }
    }
}
