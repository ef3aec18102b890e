//! The executable surface: sensor servers, the fusion monitor, calibration,
//! layout and bandwidth reports, and the skeleton recording format.

mod calibrate;
mod config;
mod monitor;
mod recording;
mod replay;
mod report;
mod serve;

pub use calibrate::{run_calibrate, CalibrateOptions, CameraFit};
pub use config::RunConfig;
pub use monitor::{
    parse_command, run_monitor, spawn_stdin_commands, CameraSummary, MonitorCommand, MonitorOptions,
    MonitorSummary,
};
pub use recording::{
    decode_recording, encode_frame, encode_header, encode_recording, RecordError, RecordedFrame,
    RecordedJoint, RecordedSkeleton, Recording, RecordingError, RecordingErrorKind, RecordingHeader,
    RecordingWriter, RECORDED_JOINT_LEN, RECORDING_HEADER_LEN, RECORDING_MAGIC, RECORDING_VERSION,
};
pub use replay::{parse_replay_text, replay_lines, summarize, OutputSummary};
pub use report::{bandwidth_report, bandwidth_table, plan_report};
pub use serve::{run_serve, ServeOptions, ServeSummary};

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

/// Failures mapped onto process exit codes.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Runtime(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Input(_) => 2,
            AppError::Conflict(_) => 3,
            AppError::Degenerate(_) => 4,
            AppError::Runtime(_) => 1,
        }
    }
}

pub fn unix_micros() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_micros() as u64)
        .unwrap_or(0)
}

/// Fixed-rate scheduler. Falling more than one period behind drops the
/// missed ticks instead of bursting to catch up.
pub struct Pacer {
    period: Duration,
    next: Instant,
}

impl Pacer {
    pub fn new(hz: f64) -> Self {
        Pacer {
            period: Duration::from_secs_f64(1.0 / hz),
            next: Instant::now(),
        }
    }

    /// Sleeps until the next tick or until `stop` is raised; false on stop.
    pub fn wait(&mut self, stop: &AtomicBool) -> bool {
        loop {
            if stop.load(Ordering::SeqCst) {
                return false;
            }
            let now = Instant::now();
            if now >= self.next {
                self.next = if now - self.next > self.period {
                    now + self.period
                } else {
                    self.next + self.period
                };
                return true;
            }
            std::thread::sleep((self.next - now).min(Duration::from_millis(20)));
        }
    }
}
