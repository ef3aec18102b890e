//! A camera server, the registry and a client in one process: the server
//! registers, the client discovers it, and a feeder thread keeps only the
//! newest packet per camera while a 30 Hz consumer decodes what it finds.
//!
//! cargo run --example stream_loopback -- [scene.json] [seconds]

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use depthgrid::app::Pacer;
use depthgrid::codec::DepthPackingParams;
use depthgrid::net::*;
use depthgrid::sim::Simulator;

fn main() {
    let mut args = std::env::args().skip(1);
    let scene = args.next().unwrap_or_else(|| format!("{}/scenes/orbit.json", env!("CARGO_MANIFEST_DIR")));
    let seconds: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3.0);

    let registry = RegistryServer::spawn("127.0.0.1:0", Duration::from_secs(10)).expect("registry");
    let server = Arc::new(StreamServer::bind("127.0.0.1:0", 8).expect("stream server"));
    let mut sim = Simulator::from_file(&scene).expect("scene");
    let cameras = sim.camera_ids();
    RegistryClient::connect(registry.local_addr())
        .and_then(|mut c| Ok(c.register("loopback", "127.0.0.1", server.local_addr().port(), &cameras)))
        .expect("connect")
        .expect("register");

    let stop = Arc::new(AtomicBool::new(false));
    let producer = {
        let (server, stop) = (server.clone(), stop.clone());
        std::thread::spawn(move || {
            let mut encoders: Vec<FrameEncoder> = cameras.iter().map(|_| FrameEncoder::new(StreamCodecConfig::default())).collect();
            let period = Duration::from_secs_f64(1.0 / sim.scene().fps);
            let mut next = Instant::now();
            while !stop.load(Ordering::SeqCst) {
                let seq = sim.frame() as u32;
                for (out, enc) in sim.step(None).into_iter().zip(&mut encoders) {
                    let frame = SensorFrame {
                        camera_id: out.camera_id,
                        seq,
                        timestamp_us: seq as u64 * 33_333,
                        depth: Some(out.depth),
                        color: Some(out.color),
                        labels: Some(out.labels),
                        skeletons: Some(out.skeletons),
                    };
                    let _ = server.publish(&enc.encode(&frame).expect("encode"));
                }
                next += period;
                std::thread::sleep(next.saturating_duration_since(Instant::now()));
            }
        })
    };

    let entries = RegistryClient::connect(registry.local_addr()).unwrap().list().expect("list");
    for e in &entries {
        println!("discovered {} at {} with cameras {:?}", e.server_name, e.endpoint(), e.camera_ids);
    }
    let mailboxes = Mailboxes::new();
    let feeder = spawn_feeder(entries[0].endpoint(), mailboxes.clone(), FeederOptions::default());

    let mut decoders = std::collections::BTreeMap::new();
    let (mut ticks, mut frames, mut people) = (0u64, 0u64, 0usize);
    let started = Instant::now();
    let mut pacer = Pacer::new(30.0);
    while started.elapsed().as_secs_f64() < seconds && pacer.wait(&stop) {
        for (camera, taken) in mailboxes.take_all() {
            let dec = decoders.entry(camera).or_insert_with(|| FrameDecoder::new(DepthPackingParams::default()));
            if let Ok(frame) = dec.decode_with_keyframe(&taken.packet, taken.keyframe.as_deref()) {
                frames += 1;
                people += frame.skeletons.map_or(0, |s| s.len());
            }
        }
        ticks += 1;
    }
    stop.store(true, Ordering::SeqCst);
    producer.join().unwrap();
    feeder.stop();

    println!("{ticks} ticks, {frames} frames decoded, {people} skeleton observations");
    for (camera, s) in mailboxes.stats() {
        println!(
            "camera {camera}: received {} skipped {} ({:.1}%), {:.1} KiB per packet",
            s.received,
            s.skipped,
            100.0 * s.skipped as f64 / s.received.max(1) as f64,
            s.bytes as f64 / s.received.max(1) as f64 / 1024.0
        );
    }
    registry.shutdown();
}
