use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{unix_micros, AppError, Pacer};
use crate::net::{
    FrameEncoder, NetError, RegistryClient, RegistryError, SensorFrame, StreamCodecConfig, StreamServer,
    DEFAULT_SUBSCRIBER_QUEUE, DEFAULT_TTL,
};
use crate::sim::Simulator;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub scene: PathBuf,
    /// Cameras to serve; all of the scene's when empty.
    pub cameras: Vec<u16>,
    pub name: String,
    /// Registry endpoint, or `None` to stream without registering.
    pub registry: Option<String>,
    pub listen: String,
    /// Host name announced to the registry.
    pub advertise_host: String,
    /// Frame rate; the scene's when `None`.
    pub fps: Option<f64>,
    pub frames: Option<u64>,
    pub duration: Option<Duration>,
    pub seed: Option<u64>,
    pub codec: StreamCodecConfig,
}

impl ServeOptions {
    pub fn new(scene: impl Into<PathBuf>) -> Self {
        ServeOptions {
            scene: scene.into(),
            cameras: Vec::new(),
            name: "sensors".into(),
            registry: None,
            listen: "127.0.0.1:0".into(),
            advertise_host: "127.0.0.1".into(),
            fps: None,
            frames: None,
            duration: None,
            seed: None,
            codec: StreamCodecConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServeSummary {
    pub frames: u64,
    pub packets: u64,
    pub bytes: u64,
    pub elapsed: Duration,
}

fn register(endpoint: &str, name: &str, host: &str, port: u16, cameras: &[u16]) -> Result<RegistryClient, AppError> {
    let mut client = RegistryClient::connect(endpoint)
        .map_err(|e| AppError::Input(format!("registry {endpoint} unreachable: {e}")))?;
    match client.register(name, host, port, cameras) {
        Ok(()) => Ok(client),
        Err(NetError::Registry(RegistryError::Duplicate)) => {
            Err(AppError::Conflict(format!("server name {name:?} already registered")))
        }
        Err(e) => Err(AppError::Input(format!("registry: {e}"))),
    }
}

/// Keeps the registration alive, re-registering if it expired.
fn spawn_heartbeat(
    client: RegistryClient,
    name: String,
    host: String,
    port: u16,
    cameras: Vec<u16>,
    stop: Arc<AtomicBool>,
) -> std::thread::JoinHandle<RegistryClient> {
    std::thread::spawn(move || {
        let mut client = client;
        let period = DEFAULT_TTL / 4;
        let mut last = Instant::now();
        while !stop.load(Ordering::SeqCst) {
            std::thread::sleep(Duration::from_millis(50));
            if last.elapsed() < period {
                continue;
            }
            last = Instant::now();
            if let Err(NetError::Registry(RegistryError::Unknown)) = client.ping(&name) {
                let _ = client.register(&name, &host, port, &cameras);
            }
        }
        client
    })
}

/// Renders, encodes and publishes the selected cameras at a fixed rate until
/// `stop` is raised or the frame/duration budget runs out. Progress lines go
/// to `log`; the first one is `LISTENING <addr>`.
pub fn run_serve(opts: &ServeOptions, stop: &AtomicBool, log: &mut dyn FnMut(&str)) -> Result<ServeSummary, AppError> {
    let mut sim = Simulator::from_file(&opts.scene).map_err(AppError::Input)?;
    if let Some(seed) = opts.seed {
        let mut scene = sim.scene().clone();
        scene.seed = seed;
        sim = Simulator::new(scene).map_err(AppError::Input)?;
    }
    let all = sim.camera_ids();
    let cameras = if opts.cameras.is_empty() { all.clone() } else { opts.cameras.clone() };
    if let Some(c) = cameras.iter().find(|c| !all.contains(c)) {
        return Err(AppError::Input(format!("scene has no camera {c}")));
    }
    let fps = opts.fps.unwrap_or(sim.scene().fps);
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(AppError::Input(format!("fps must be positive, got {fps}")));
    }
    let server = StreamServer::bind(opts.listen.as_str(), DEFAULT_SUBSCRIBER_QUEUE)
        .map_err(|e| AppError::Input(format!("cannot listen on {}: {e}", opts.listen)))?;
    let port = server.local_addr().port();
    let heartbeat_stop = Arc::new(AtomicBool::new(false));
    let heartbeat = match &opts.registry {
        Some(endpoint) => {
            let client = register(endpoint, &opts.name, &opts.advertise_host, port, &cameras)?;
            Some(spawn_heartbeat(
                client,
                opts.name.clone(),
                opts.advertise_host.clone(),
                port,
                cameras.clone(),
                heartbeat_stop.clone(),
            ))
        }
        None => None,
    };
    log(&format!("LISTENING {}", server.local_addr()));

    let mut encoders: BTreeMap<u16, FrameEncoder> = cameras.iter().map(|&c| (c, FrameEncoder::new(opts.codec))).collect();
    let mut summary = ServeSummary::default();
    let started = Instant::now();
    let mut pacer = Pacer::new(fps);
    let mut failure = None;
    while pacer.wait(stop) {
        if opts.frames.is_some_and(|n| summary.frames >= n) || opts.duration.is_some_and(|d| started.elapsed() >= d) {
            break;
        }
        let seq = sim.frame() as u32;
        for out in sim.step(Some(&cameras)) {
            let frame = SensorFrame {
                camera_id: out.camera_id,
                seq,
                timestamp_us: unix_micros(),
                depth: Some(out.depth),
                color: Some(out.color),
                labels: Some(out.labels),
                skeletons: Some(out.skeletons),
            };
            let enc = encoders.get_mut(&out.camera_id).expect("served camera");
            match enc.encode(&frame) {
                Ok(packet) => match server.publish(&packet) {
                    Ok(len) => {
                        summary.packets += 1;
                        summary.bytes += len as u64;
                    }
                    Err(e) => failure = Some(AppError::Runtime(format!("publish: {e}"))),
                },
                Err(e) => failure = Some(AppError::Runtime(format!("encode camera {}: {e}", out.camera_id))),
            }
        }
        if failure.is_some() {
            break;
        }
        summary.frames += 1;
    }
    summary.elapsed = started.elapsed();
    heartbeat_stop.store(true, Ordering::SeqCst);
    if let Some(h) = heartbeat {
        if let Ok(mut client) = h.join() {
            let _ = client.unregister(&opts.name);
        }
    }
    server.shutdown();
    match failure {
        Some(e) => Err(e),
        None => {
            log(&format!(
                "STOPPED frames={} packets={} bytes={}",
                summary.frames, summary.packets, summary.bytes
            ));
            Ok(summary)
        }
    }
}
