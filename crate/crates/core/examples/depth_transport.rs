//! Encodes one simulated camera through the lossy stream codec and reports
//! how much smaller it gets and how much depth it loses.
//!
//! cargo run --example depth_transport -- [scene.json] [frames]

use depthgrid::codec::{channels_to_depth, depth_to_channels, DepthPackingParams};
use depthgrid::net::{encode_packet, FrameDecoder, FrameEncoder, SensorFrame, StreamCodecConfig};
use depthgrid::sim::Simulator;

fn main() {
    let mut args = std::env::args().skip(1);
    let scene = args.next().unwrap_or_else(|| format!("{}/scenes/orbit.json", env!("CARGO_MANIFEST_DIR")));
    let frames: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);

    let params = DepthPackingParams::default();
    for d in [500u16, 1234, 2047, 3500] {
        let c = depth_to_channels(d, &params);
        println!("depth {d:>4} mm -> channels [{:.4}, {:.4}, {:.4}] -> {}", c[0], c[1], c[2], channels_to_depth(c, &params));
    }

    let mut sim = Simulator::from_file(&scene).expect("scene");
    let camera = sim.camera_ids()[0];
    let mut lossy = FrameEncoder::new(StreamCodecConfig::default());
    let mut raw = FrameEncoder::new(StreamCodecConfig::raw());
    let mut decoder = FrameDecoder::new(params);
    let (mut lossy_bytes, mut raw_bytes) = (0usize, 0usize);
    let (mut worst, mut sum, mut count) = (0u16, 0u64, 0u64);
    for seq in 0..frames {
        let out = sim.step(Some(&[camera])).remove(0);
        let frame = SensorFrame {
            camera_id: camera,
            seq,
            timestamp_us: seq as u64 * 33_333,
            depth: Some(out.depth),
            color: Some(out.color),
            labels: Some(out.labels),
            skeletons: Some(out.skeletons),
        };
        let packet = lossy.encode(&frame).expect("encode");
        lossy_bytes += encode_packet(&packet).unwrap().len();
        raw_bytes += encode_packet(&raw.encode(&frame).unwrap()).unwrap().len();
        let back = decoder.decode(&packet).expect("decode");
        let (a, b) = (frame.depth.unwrap(), back.depth.unwrap());
        for (x, y) in a.data.iter().zip(&b.data).filter(|(x, _)| **x != 0) {
            let e = x.abs_diff(*y);
            worst = worst.max(e);
            sum += e as u64;
            count += 1;
        }
    }
    println!("camera {camera}, {frames} frames");
    println!("raw   {:>8} bytes/frame", raw_bytes / frames as usize);
    println!("lossy {:>8} bytes/frame ({:.1}x smaller)", lossy_bytes / frames as usize, raw_bytes as f64 / lossy_bytes as f64);
    println!("depth error over {count} valid pixels: mean {:.2} mm, max {worst} mm", sum as f64 / count.max(1) as f64);
}
