use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, TryRecvError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::config::RunConfig;
use super::recording::{RecordedFrame, RecordedSkeleton, RecordingHeader, RecordingWriter};
use super::{unix_micros, AppError, Pacer};
use crate::codec::DepthPackingParams;
use crate::fusion::{FusionError, Tracker};
use crate::geometry::{bandwidth, fuse_clouds, subsample, write_ply, BandwidthModel, CalibrationSet, SideLink};
use crate::model::{CameraIntrinsics, InputSkeleton, RigidTransform, TrackState};
use crate::net::{spawn_feeder, CameraStats, FeederHandle, FeederOptions, FrameDecoder, Mailboxes, RegistryClient, SensorFrame};
use crate::sim::Scene;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonitorCommand {
    Snapshot(Option<PathBuf>),
    Label { output_id: u32, text: String },
    Record(Option<PathBuf>),
    StopRecording,
    Quit,
}

pub fn parse_command(line: &str) -> Result<MonitorCommand, String> {
    let line = line.trim();
    let (word, rest) = line.split_once(char::is_whitespace).map_or((line, ""), |(w, r)| (w, r.trim()));
    match word {
        "snapshot" => Ok(MonitorCommand::Snapshot((!rest.is_empty()).then(|| PathBuf::from(rest)))),
        "label" => {
            let (id, text) = rest.split_once(char::is_whitespace).ok_or("usage: label <output_id> <text>")?;
            let output_id = id.parse().map_err(|_| format!("bad output id {id:?}"))?;
            let text = text.trim();
            if text.is_empty() || text.len() > u8::MAX as usize {
                return Err("label must be 1 to 255 bytes".into());
            }
            Ok(MonitorCommand::Label {
                output_id,
                text: text.to_string(),
            })
        }
        "record" if rest == "stop" => Ok(MonitorCommand::StopRecording),
        "record" => Ok(MonitorCommand::Record((!rest.is_empty()).then(|| PathBuf::from(rest)))),
        "quit" | "exit" => Ok(MonitorCommand::Quit),
        other => Err(format!("unknown command {other:?}")),
    }
}

/// Reads commands from standard input on a background thread. Unparseable
/// lines are reported on stderr; end of input ends the stream of commands
/// but not the monitor.
pub fn spawn_stdin_commands() -> Receiver<MonitorCommand> {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            match parse_command(&line) {
                Ok(c) => {
                    if tx.send(c).is_err() {
                        break;
                    }
                }
                Err(e) => eprintln!("ERR {e}"),
            }
        }
    });
    rx
}

#[derive(Debug, Clone)]
pub struct MonitorOptions {
    pub config: RunConfig,
    /// Discover servers through the configured registry.
    pub use_registry: bool,
    /// Server endpoints to subscribe to directly.
    pub servers: Vec<String>,
    pub tick_hz: f64,
    pub duration: Option<Duration>,
    /// A camera whose newest frame is older than this stops contributing and
    /// is reported stalled.
    pub stale_after: Duration,
    pub trace: Option<PathBuf>,
    pub snapshot_dir: PathBuf,
}

impl MonitorOptions {
    pub fn new(config: RunConfig) -> Self {
        MonitorOptions {
            config,
            use_registry: true,
            servers: Vec::new(),
            tick_hz: 30.0,
            duration: None,
            stale_after: Duration::from_millis(500),
            trace: None,
            snapshot_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraSummary {
    pub camera_id: u16,
    pub received: u64,
    pub skipped: u64,
    pub skip_rate: f64,
    pub decode_errors: u64,
    pub bytes: u64,
    pub fps: f64,
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorSummary {
    pub ticks: u64,
    pub elapsed_s: f64,
    /// Ticks per second up to the end of the last tick. Reaches the target
    /// rate only when every tick finished within its period.
    pub tick_rate: f64,
    pub cameras: Vec<CameraSummary>,
    pub total_bytes: u64,
    pub measured_bps: f64,
    pub mean_packet_bytes: f64,
    /// Bandwidth model with the mean packet size as bytes per frame.
    pub predicted_bps: f64,
    pub max_confirmed: usize,
    pub recorded_frames: u64,
    pub snapshots: Vec<(PathBuf, usize)>,
}

/// Subscribes to every server the registry announces, polling it once a
/// second. Warns while the registry is empty or unreachable.
struct Discovery {
    stop: Arc<AtomicBool>,
    thread: Option<std::thread::JoinHandle<()>>,
    feeders: Arc<Mutex<BTreeMap<String, FeederHandle>>>,
}

impl Discovery {
    fn start(registry: Option<String>, direct: &[String], mailboxes: Arc<Mailboxes>) -> Self {
        let feeders = Arc::new(Mutex::new(BTreeMap::new()));
        for addr in direct {
            feeders
                .lock()
                .unwrap()
                .insert(addr.clone(), spawn_feeder(addr.clone(), mailboxes.clone(), FeederOptions::default()));
        }
        let stop = Arc::new(AtomicBool::new(false));
        let thread = registry.map(|endpoint| {
            let (stop, feeders) = (stop.clone(), feeders.clone());
            std::thread::spawn(move || {
                let mut last_poll: Option<Instant> = None;
                while !stop.load(Ordering::SeqCst) {
                    if last_poll.is_some_and(|t| t.elapsed() < Duration::from_secs(1)) {
                        std::thread::sleep(Duration::from_millis(20));
                        continue;
                    }
                    last_poll = Some(Instant::now());
                    let listed = RegistryClient::connect(endpoint.as_str()).map_err(|e| e.to_string()).and_then(|mut c| c.list().map_err(|e| e.to_string()));
                    match listed {
                        Ok(entries) if entries.is_empty() => eprintln!("WARN registry {endpoint} lists no servers; retrying"),
                        Ok(entries) => {
                            let mut f = feeders.lock().unwrap();
                            for e in entries {
                                let addr = e.endpoint();
                                if !f.contains_key(&addr) {
                                    let h = spawn_feeder(addr.clone(), mailboxes.clone(), FeederOptions::default());
                                    f.insert(addr, h);
                                }
                            }
                        }
                        Err(e) => eprintln!("WARN registry {endpoint}: {e}; retrying"),
                    }
                }
            })
        });
        Discovery { stop, thread, feeders }
    }

    fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        for (_, f) in std::mem::take(&mut *self.feeders.lock().unwrap()) {
            f.stop();
        }
    }
}

struct Recorder {
    path: PathBuf,
    writer: RecordingWriter<BufWriter<File>>,
}

fn open_recorder(path: PathBuf, fps: u16) -> Result<Recorder, AppError> {
    let file = File::create(&path).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
    let writer = RecordingWriter::new(BufWriter::new(file), &RecordingHeader::new(fps, unix_micros()))
        .map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(Recorder { path, writer })
}

struct CameraView {
    frame: SensorFrame,
    at: Instant,
}

struct Monitor<'a> {
    opts: &'a MonitorOptions,
    calibration: BTreeMap<u16, RigidTransform>,
    intrinsics: BTreeMap<u16, CameraIntrinsics>,
    decoders: BTreeMap<u16, FrameDecoder>,
    decode_errors: BTreeMap<u16, u64>,
    latest: BTreeMap<u16, CameraView>,
    recorder: Option<Recorder>,
    recorded_frames: u64,
    snapshots: Vec<(PathBuf, usize)>,
}

impl Monitor<'_> {
    fn absorb(&mut self, mailboxes: &Mailboxes) {
        for (cam, taken) in mailboxes.take_all() {
            let dec = self.decoders.entry(cam).or_insert_with(|| FrameDecoder::new(DepthPackingParams::default()));
            match dec.decode_with_keyframe(&taken.packet, taken.keyframe.as_deref()) {
                Ok(frame) => {
                    self.latest.insert(
                        cam,
                        CameraView {
                            frame,
                            at: Instant::now(),
                        },
                    );
                }
                Err(_) => {
                    dec.forget_keyframe();
                    *self.decode_errors.entry(cam).or_default() += 1;
                }
            }
        }
    }

    fn fresh(&self) -> impl Iterator<Item = (&u16, &CameraView)> {
        let limit = self.opts.stale_after;
        self.latest.iter().filter(move |(_, v)| v.at.elapsed() <= limit)
    }

    fn snapshot(&mut self, path: Option<PathBuf>, tick: u64, out: &mut dyn Write) -> Result<(), AppError> {
        let path = path.unwrap_or_else(|| self.opts.snapshot_dir.join(format!("snapshot-{tick:06}.ply")));
        let k = self.opts.config.subsample;
        let mut clouds = Vec::new();
        for (cam, view) in self.fresh() {
            let (Some(depth), Some(t)) = (&view.frame.depth, self.calibration.get(cam)) else {
                continue;
            };
            let intr = self.intrinsics.get(cam).copied().unwrap_or_default();
            let cloud = subsample(depth, &intr, k, view.frame.color.as_ref()).map_err(|e| AppError::Input(e.to_string()))?;
            clouds.push((cloud, *t));
        }
        let fused = fuse_clouds(&clouds);
        let file = File::create(&path).map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
        write_ply(BufWriter::new(file), &fused).map_err(|e| AppError::Runtime(e.to_string()))?;
        let _ = writeln!(out, "SNAPSHOT {} points={} cameras={}", path.display(), fused.len(), clouds.len());
        self.snapshots.push((path, fused.len()));
        Ok(())
    }
}

fn camera_summaries(
    stats: &BTreeMap<u16, CameraStats>,
    since: &BTreeMap<u16, CameraStats>,
    interval: f64,
    errors: &BTreeMap<u16, u64>,
    stale_after: Duration,
) -> Vec<CameraSummary> {
    let now = unix_micros();
    stats
        .iter()
        .map(|(&cam, s)| {
            let before = since.get(&cam).copied().unwrap_or_default();
            let received = s.received - before.received;
            let skipped = s.skipped - before.skipped;
            CameraSummary {
                camera_id: cam,
                received,
                skipped,
                skip_rate: if received == 0 { 0.0 } else { skipped as f64 / received as f64 },
                decode_errors: errors.get(&cam).copied().unwrap_or(0),
                bytes: s.bytes - before.bytes,
                fps: received as f64 / interval,
                stalled: s.last_receive_us.is_none_or(|t| now.saturating_sub(t) > stale_after.as_micros() as u64),
            }
        })
        .collect()
}

fn bandwidth_figures(cams: &[CameraSummary], elapsed: f64, fps: f64) -> (u64, f64, f64, f64) {
    let bytes: u64 = cams.iter().map(|c| c.bytes).sum();
    let packets: u64 = cams.iter().map(|c| c.received).sum();
    let mean = if packets == 0 { 0.0 } else { bytes as f64 / packets as f64 };
    let measured = if elapsed > 0.0 { bytes as f64 * 8.0 / elapsed } else { 0.0 };
    let predicted = bandwidth(&BandwidthModel {
        cameras: cams.len() as u64,
        bytes_per_frame: mean.round() as u64,
        fps: fps.round() as u64,
    }) as f64;
    (bytes, mean, measured, predicted)
}

/// Runs the fusion client until `stop`, a `quit` command or the configured
/// duration. Stats, snapshot and summary lines go to `out`.
pub fn run_monitor(
    opts: &MonitorOptions,
    commands: &Receiver<MonitorCommand>,
    stop: &AtomicBool,
    out: &mut dyn Write,
) -> Result<MonitorSummary, AppError> {
    let cfg = &opts.config;
    cfg.check()?;
    if !(opts.tick_hz > 0.0 && opts.tick_hz.is_finite()) {
        return Err(AppError::Input(format!("tick rate must be positive, got {}", opts.tick_hz)));
    }
    let calib_file = File::open(&cfg.calibration)
        .map_err(|e| AppError::Input(format!("calibration {}: {e}", cfg.calibration.display())))?;
    let calibration = CalibrationSet::read(BufReader::new(calib_file))
        .map_err(|e| AppError::Input(format!("calibration {}: {e}", cfg.calibration.display())))?;
    // Camera frame rate for the bandwidth model; the tick rate when unknown.
    let mut camera_fps = opts.tick_hz;
    let (intrinsics, side_links): (BTreeMap<u16, CameraIntrinsics>, Vec<SideLink>) = match &cfg.scene {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| AppError::Input(format!("{}: {e}", p.display())))?;
            let scene = Scene::from_json(&text).map_err(AppError::Input)?;
            let intr = scene.rigs.iter().map(|r| (r.camera_id, scene.intrinsics_of(r))).collect();
            camera_fps = scene.fps;
            (intr, scene.side_links.clone())
        }
        None => (BTreeMap::new(), Vec::new()),
    };
    let mut tracker = Tracker::new(cfg.fusion)
        .map_err(|e| AppError::Input(e.to_string()))?
        .with_side_links(side_links);
    let mut trace = match &opts.trace {
        Some(p) => Some(BufWriter::new(
            File::create(p).map_err(|e| AppError::Input(format!("{}: {e}", p.display())))?,
        )),
        None => None,
    };
    let header_fps = opts.tick_hz.round().clamp(1.0, u16::MAX as f64) as u16;
    let mut mon = Monitor {
        opts,
        calibration: calibration.transforms.clone(),
        intrinsics,
        decoders: BTreeMap::new(),
        decode_errors: BTreeMap::new(),
        latest: BTreeMap::new(),
        recorder: match &cfg.recording {
            Some(p) => Some(open_recorder(p.clone(), header_fps)?),
            None => None,
        },
        recorded_frames: 0,
        snapshots: Vec::new(),
    };

    let mailboxes = Mailboxes::new();
    let discovery = Discovery::start(opts.use_registry.then(|| cfg.registry.clone()), &opts.servers, mailboxes.clone());
    let started = Instant::now();
    let mut pacer = Pacer::new(opts.tick_hz);
    let mut ticks = 0u64;
    let mut max_confirmed = 0;
    let mut last_tick_end = 0.0;
    let mut last_stats = (Instant::now(), BTreeMap::new());
    let mut commands_open = true;
    let result: Result<(), AppError> = loop {
        if !pacer.wait(stop) || opts.duration.is_some_and(|d| started.elapsed() >= d) {
            break Ok(());
        }
        mon.absorb(&mailboxes);
        let inputs: Vec<InputSkeleton> = mon
            .fresh()
            .flat_map(|(_, v)| v.frame.skeletons.iter().flatten().cloned())
            .collect();
        let outputs = match tracker.ingest_frame(&inputs, &mon.calibration) {
            Ok(o) => o,
            Err(FusionError::MissingCalibration(c)) => {
                break Err(AppError::Input(format!(
                    "camera {c} reports but {} has no transform for it",
                    cfg.calibration.display()
                )))
            }
            Err(e) => break Err(AppError::Runtime(e.to_string())),
        };
        let confirmed: Vec<_> = outputs.iter().filter(|o| o.state == TrackState::Confirmed).collect();
        max_confirmed = max_confirmed.max(confirmed.len());
        if let Some(t) = trace.as_mut() {
            for r in tracker.trace() {
                let _ = writeln!(t, "{}", r.to_line());
            }
        }
        if let Some(rec) = mon.recorder.as_mut() {
            let frame = RecordedFrame {
                frame_index: ticks as u32,
                skeletons: confirmed.iter().map(|o| RecordedSkeleton::from_output(o)).collect(),
            };
            if let Err(e) = rec.writer.write_frame(&frame) {
                break Err(AppError::Runtime(format!("{}: {e}", rec.path.display())));
            }
            mon.recorded_frames += 1;
        }
        ticks += 1;
        last_tick_end = started.elapsed().as_secs_f64();

        let mut quit = false;
        while commands_open {
            match commands.try_recv() {
                Ok(MonitorCommand::Quit) => quit = true,
                Ok(MonitorCommand::Label { output_id, text }) => {
                    if tracker.set_label(output_id, &text) {
                        let _ = writeln!(out, "LABEL {output_id} {text}");
                    } else {
                        let _ = writeln!(out, "ERR no output {output_id}");
                    }
                }
                Ok(MonitorCommand::Snapshot(p)) => {
                    if let Err(e) = mon.snapshot(p, ticks, out) {
                        let _ = writeln!(out, "ERR snapshot: {e}");
                    }
                }
                Ok(MonitorCommand::Record(p)) => {
                    let p = p.unwrap_or_else(|| opts.snapshot_dir.join("recording.sk3d"));
                    match open_recorder(p, header_fps) {
                        Ok(r) => {
                            let _ = writeln!(out, "RECORDING {}", r.path.display());
                            if let Some(mut old) = mon.recorder.replace(r) {
                                let _ = old.writer.flush();
                            }
                        }
                        Err(e) => {
                            let _ = writeln!(out, "ERR record: {e}");
                        }
                    }
                }
                Ok(MonitorCommand::StopRecording) => {
                    if let Some(mut r) = mon.recorder.take() {
                        let _ = r.writer.flush();
                        let _ = writeln!(out, "RECORDED {}", r.path.display());
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => commands_open = false,
            }
        }
        if quit {
            break Ok(());
        }

        let interval = last_stats.0.elapsed();
        if interval >= cfg.stats_interval {
            let stats = mailboxes.stats();
            let secs = interval.as_secs_f64();
            let cams = camera_summaries(&stats, &last_stats.1, secs, &mon.decode_errors, opts.stale_after);
            let (_, mean, measured, predicted) = bandwidth_figures(&cams, secs, camera_fps);
            let _ = writeln!(
                out,
                "STATS t={:.2} ticks={} outputs={} confirmed={} rx_mbps={:.3} model_mbps={:.3} mean_packet={:.0}",
                started.elapsed().as_secs_f64(),
                ticks,
                outputs.len(),
                confirmed.len(),
                measured / 1e6,
                predicted / 1e6,
                mean
            );
            for c in &cams {
                let _ = writeln!(
                    out,
                    "STATS camera={} fps={:.1} received={} skipped={} skip_pct={:.1} decode_errors={} stalled={}",
                    c.camera_id,
                    c.fps,
                    c.received,
                    c.skipped,
                    100.0 * c.skip_rate,
                    c.decode_errors,
                    if c.stalled { "yes" } else { "no" }
                );
            }
            let _ = out.flush();
            last_stats = (Instant::now(), stats);
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    discovery.shutdown();
    if let Some(mut r) = mon.recorder.take() {
        let _ = r.writer.flush();
    }
    if let Some(mut t) = trace {
        let _ = t.flush();
    }
    result?;

    let cams = camera_summaries(&mailboxes.stats(), &BTreeMap::new(), elapsed, &mon.decode_errors, opts.stale_after);
    let (total_bytes, mean, measured, predicted) = bandwidth_figures(&cams, elapsed, camera_fps);
    let summary = MonitorSummary {
        ticks,
        elapsed_s: elapsed,
        tick_rate: if last_tick_end > 0.0 { ticks as f64 / last_tick_end } else { 0.0 },
        cameras: cams,
        total_bytes,
        measured_bps: measured,
        mean_packet_bytes: mean,
        predicted_bps: predicted,
        max_confirmed,
        recorded_frames: mon.recorded_frames,
        snapshots: mon.snapshots,
    };
    let _ = writeln!(out, "SUMMARY {}", serde_json::to_string(&summary).expect("summary serializes"));
    let _ = out.flush();
    Ok(summary)
}
