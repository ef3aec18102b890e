use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::fusion::FusionParams;
use crate::net::registry_endpoint;

/// Settings shared by the monitor and its helpers. Loadable from JSON; any
/// missing field takes its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub registry: String,
    pub scene: Option<PathBuf>,
    pub calibration: PathBuf,
    pub fusion: FusionParams,
    pub recording: Option<PathBuf>,
    #[serde(with = "secs")]
    pub stats_interval: Duration,
    pub subsample: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            registry: registry_endpoint(),
            scene: None,
            calibration: PathBuf::from("calibration.txt"),
            fusion: FusionParams::default(),
            recording: None,
            stats_interval: Duration::from_secs(1),
            subsample: 1,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), AppError> {
        if !(1..=4).contains(&self.subsample) {
            return Err(AppError::Input(format!("subsample factor must be 1..=4, got {}", self.subsample)));
        }
        if self.stats_interval.is_zero() {
            return Err(AppError::Input("stats interval must be positive".into()));
        }
        self.fusion.check().map_err(|e| AppError::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| AppError::Input(format!("config: {e}")))?;
        c.check()?;
        Ok(c)
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}
