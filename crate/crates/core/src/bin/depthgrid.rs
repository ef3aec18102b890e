use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use depthgrid::app::{
    bandwidth_table, bandwidth_report, decode_recording, encode_recording, parse_replay_text, plan_report,
    replay_lines, run_calibrate, run_monitor, run_serve, spawn_stdin_commands, summarize, AppError, CalibrateOptions,
    MonitorOptions, RunConfig, ServeOptions,
};
use depthgrid::fusion::FusionParams;
use depthgrid::geometry::{IcpParams, DEFAULT_BYTES_PER_FRAME, DEFAULT_FPS, DEFAULT_OVERLAP_M};
use depthgrid::net::{registry_endpoint, RegistryServer, StreamCodecConfig};

#[derive(Parser)]
#[command(name = "depthgrid", version, about = "Distributed depth-camera monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the naming service servers register with.
    Registry {
        #[arg(long, default_value = "127.0.0.1:7400")]
        listen: String,
        /// Seconds an entry survives without a heartbeat.
        #[arg(long, default_value_t = 10.0)]
        ttl: f64,
    },
    /// Simulate cameras from a scene file and stream them.
    Serve(ServeArgs),
    /// Discover servers, fuse their skeletons and report.
    Monitor(MonitorArgs),
    /// Compute camera transforms from correspondences and clouds.
    Calibrate(CalibrateArgs),
    /// Print a skeleton recording as JSON lines.
    Replay {
        file: PathBuf,
        /// Re-record the printed frames into this file.
        #[arg(long)]
        rewrite: Option<PathBuf>,
        /// Print one line per output instead of the frames.
        #[arg(long)]
        summary: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Camera spacing for two facing walls.
    Plan {
        /// Distance between the walls (m).
        #[arg(long)]
        depth: f64,
        #[arg(long, default_value_t = DEFAULT_OVERLAP_M)]
        overlap: f64,
        #[arg(long, default_value_t = 57.5)]
        hfov: f64,
        #[arg(long, default_value_t = 4)]
        cameras: usize,
    },
    /// Network bandwidth needed to stream every camera.
    Bandwidth {
        /// Camera count; prints counts 1 to 5 when omitted.
        #[arg(long)]
        cameras: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_BYTES_PER_FRAME)]
        bytes: u64,
        #[arg(long, default_value_t = DEFAULT_FPS)]
        fps: u64,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Cameras to serve, comma separated; all when omitted.
    #[arg(long, value_delimiter = ',')]
    cameras: Vec<u16>,
    #[arg(long, default_value = "sensors")]
    name: String,
    /// Registry endpoint; defaults to $DEPTHGRID_REGISTRY or 127.0.0.1:7400.
    #[arg(long)]
    registry: Option<String>,
    #[arg(long, conflicts_with = "registry")]
    no_registry: bool,
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    #[arg(long, default_value = "127.0.0.1")]
    advertise_host: String,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    frames: Option<u64>,
    /// Seconds to run.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Send uncompressed planes.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct MonitorArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    registry: Option<String>,
    #[arg(long)]
    no_registry: bool,
    /// Server endpoint to subscribe to directly; repeatable.
    #[arg(long = "server")]
    servers: Vec<String>,
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Scene file supplying intrinsics and side links.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// JSON fusion parameters.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Seconds between STATS reports.
    #[arg(long)]
    stats_interval: Option<f64>,
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long, default_value_t = 30.0)]
    tick_hz: f64,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value = ".")]
    snapshot_dir: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 0)]
    reference: u16,
    /// CAMERA=FILE correspondence file; repeatable.
    #[arg(long = "pairs", value_parser = camera_path)]
    pairs: Vec<(u16, PathBuf)>,
    /// CAMERA=FILE raw PLY cloud; repeatable.
    #[arg(long = "cloud", value_parser = camera_path)]
    clouds: Vec<(u16, PathBuf)>,
    /// Existing calibration file to extend.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = IcpParams::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = IcpParams::default().max_pair_distance)]
    max_pair_distance: f64,
}

fn camera_path(s: &str) -> Result<(u16, PathBuf), String> {
    let (cam, path) = s.split_once('=').ok_or("expected CAMERA=FILE")?;
    Ok((cam.parse().map_err(|_| format!("bad camera id {cam:?}"))?, PathBuf::from(path)))
}

fn seconds(v: f64) -> Result<Duration, AppError> {
    Duration::try_from_secs_f64(v).map_err(|_| AppError::Input(format!("bad duration {v}")))
}

fn stop_flag() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    let _ = ctrlc::set_handler(move || s.store(true, Ordering::SeqCst));
    stop
}

fn read_file(p: &PathBuf) -> Result<String, AppError> {
    std::fs::read_to_string(p).map_err(|e| AppError::Input(format!("{}: {e}", p.display())))
}

fn print_lines(lines: impl IntoIterator<Item = String>) {
    let mut out = std::io::stdout().lock();
    for l in lines {
        if writeln!(out, "{l}").is_err() {
            break;
        }
    }
}

fn registry(listen: String, ttl: f64) -> Result<(), AppError> {
    let stop = stop_flag();
    let server = RegistryServer::spawn(listen.as_str(), seconds(ttl)?)
        .map_err(|e| AppError::Input(format!("cannot listen on {listen}: {e}")))?;
    println!("REGISTRY {}", server.local_addr());
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    server.shutdown();
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), AppError> {
    let mut opts = ServeOptions::new(a.scene);
    opts.cameras = a.cameras;
    opts.name = a.name;
    opts.registry = (!a.no_registry).then(|| a.registry.unwrap_or_else(registry_endpoint));
    opts.listen = a.listen;
    opts.advertise_host = a.advertise_host;
    opts.fps = a.fps;
    opts.frames = a.frames;
    opts.duration = a.duration.map(seconds).transpose()?;
    opts.seed = a.seed;
    if a.raw {
        opts.codec = StreamCodecConfig::raw();
    }
    let stop = stop_flag();
    run_serve(&opts, &stop, &mut |line| {
        println!("{line}");
        let _ = std::io::stdout().flush();
    })?;
    Ok(())
}

fn monitor(a: MonitorArgs) -> Result<(), AppError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_json(&read_file(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(r) = a.registry {
        cfg.registry = r;
    }
    if let Some(c) = a.calibration {
        cfg.calibration = c;
    }
    if a.scene.is_some() {
        cfg.scene = a.scene;
    }
    if let Some(p) = &a.params {
        cfg.fusion = serde_json::from_str::<FusionParams>(&read_file(p)?)
            .map_err(|e| AppError::Input(format!("{}: {e}", p.display())))?;
    }
    if a.record.is_some() {
        cfg.recording = a.record;
    }
    if let Some(s) = a.stats_interval {
        cfg.stats_interval = seconds(s)?;
    }
    if let Some(k) = a.subsample {
        cfg.subsample = k;
    }
    let mut opts = MonitorOptions::new(cfg);
    opts.use_registry = !a.no_registry;
    opts.servers = a.servers;
    opts.tick_hz = a.tick_hz;
    opts.duration = a.duration.map(seconds).transpose()?;
    opts.trace = a.trace;
    opts.snapshot_dir = a.snapshot_dir;
    let stop = stop_flag();
    let commands = spawn_stdin_commands();
    run_monitor(&opts, &commands, &stop, &mut std::io::stdout().lock())?;
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<(), AppError> {
    let opts = CalibrateOptions {
        reference: a.reference,
        correspondences: a.pairs,
        clouds: a.clouds,
        icp: IcpParams {
            max_iters: a.max_iters,
            max_pair_distance: a.max_pair_distance,
            ..IcpParams::default()
        },
        base: a.base,
    };
    let (set, fits) = run_calibrate(&opts)?;
    std::fs::write(&a.out, set.to_text()).map_err(|e| AppError::Input(format!("{}: {e}", a.out.display())))?;
    print_lines(fits.iter().map(|f| f.report_line()));
    Ok(())
}

fn replay(file: PathBuf, rewrite: Option<PathBuf>, summary: bool, quiet: bool) -> Result<(), AppError> {
    let bytes = std::fs::read(&file).map_err(|e| AppError::Input(format!("{}: {e}", file.display())))?;
    let rec = decode_recording(&bytes).map_err(|e| AppError::Input(format!("{}: {e}", file.display())))?;
    let text: Vec<String> = replay_lines(&rec).collect();
    if let Some(out) = rewrite {
        let again = parse_replay_text(&text.join("\n"))?;
        let bytes = encode_recording(&again).map_err(|e| AppError::Runtime(e.to_string()))?;
        std::fs::write(&out, bytes).map_err(|e| AppError::Input(format!("{}: {e}", out.display())))?;
    }
    if summary {
        print_lines(summarize(&rec).iter().map(|s| serde_json::to_string(s).expect("summary serializes")));
    } else if !quiet {
        print_lines(text);
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Registry { listen, ttl } => registry(listen, ttl),
        Command::Serve(a) => serve(a),
        Command::Monitor(a) => monitor(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Replay {
            file,
            rewrite,
            summary,
            quiet,
        } => replay(file, rewrite, summary, quiet),
        Command::Plan {
            depth,
            overlap,
            hfov,
            cameras,
        } => plan_report(depth, hfov, overlap, cameras).map(print_lines),
        Command::Bandwidth { cameras, bytes, fps } => {
            match cameras {
                Some(n) => print_lines([bandwidth_report(n, bytes, fps)]),
                None => print_lines(bandwidth_table(5, bytes, fps)),
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
