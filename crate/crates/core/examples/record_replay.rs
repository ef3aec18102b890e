//! Records fused skeletons while a person walks across two cameras, then
//! reads the recording back as replay text and per-output summaries.
//!
//! cargo run --example record_replay -- [scene.json] [out.sk3d]

use depthgrid::app::*;
use depthgrid::fusion::{FusionParams, Tracker};
use depthgrid::model::{InputSkeleton, TrackState};
use depthgrid::sim::Simulator;

fn main() {
    let mut args = std::env::args().skip(1);
    let scene = args.next().unwrap_or_else(|| format!("{}/scenes/handoff.json", env!("CARGO_MANIFEST_DIR")));
    let path = args.next().map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("handoff.sk3d"));

    let mut sim = Simulator::from_file(&scene).expect("scene");
    let calibration = sim.world_poses();
    let frames = (sim.scene().duration_s.unwrap_or(10.0) * sim.scene().fps) as u64;
    let mut tracker = Tracker::new(FusionParams::default()).unwrap().with_side_links(sim.scene().side_links.clone());
    let file = std::fs::File::create(&path).expect("create recording");
    let header = RecordingHeader::new(sim.scene().fps as u16, unix_micros());
    let mut writer = RecordingWriter::new(std::io::BufWriter::new(file), &header).expect("header");
    for frame in 0..frames {
        let inputs: Vec<InputSkeleton> = sim.step_skeletons(None).into_iter().flat_map(|(_, s)| s).collect();
        let outputs = tracker.ingest_frame(&inputs, &calibration).unwrap();
        if frame == 60 {
            for o in &outputs {
                tracker.set_label(o.output_id, "visitor");
            }
        }
        let skeletons: Vec<RecordedSkeleton> = outputs
            .iter()
            .filter(|o| o.state == TrackState::Confirmed)
            .map(RecordedSkeleton::from_output)
            .collect();
        writer.write_frame(&RecordedFrame { frame_index: frame as u32, skeletons }).expect("write frame");
    }
    writer.flush().unwrap();
    drop(writer);

    let bytes = std::fs::read(&path).unwrap();
    let rec = decode_recording(&bytes).expect("decode");
    println!("{}: {} bytes, {} frames", path.display(), bytes.len(), rec.frames.len());
    for line in replay_lines(&rec).take(2) {
        println!("{}", &line[..line.len().min(160)]);
    }
    for s in summarize(&rec) {
        println!(
            "output {} {:?}: frames {}..={} ({} recorded), walked {:.2} m",
            s.output_id, s.labels, s.first_frame, s.last_frame, s.frames, s.path_length
        );
    }
    let again = encode_recording(&parse_replay_text(&replay_lines(&rec).map(|l| l + "\n").collect::<String>()).unwrap()).unwrap();
    println!("replay text re-encodes byte-identically: {}", again == bytes);
}
