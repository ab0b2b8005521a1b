//! Application configuration (JSON).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::localization::SelectionPolicy;
use crate::pipeline::DEFAULT_WINDOW_SIZE;
use crate::room::{
    default_corner_labels, Corner, CornerLabel, PropagationParams, RoomError, RoomModel,
    CORNER_COUNT, DEFAULT_ADVERTISE_INTERVAL_MS, DEFAULT_TX_POWER_1M,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl From<RoomError> for ConfigError {
    fn from(e: RoomError) -> Self {
        let RoomError::Invalid { field, reason } = e;
        ConfigError::Invalid { field, reason }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Sim,
    Replay,
    Live,
}

/// Per-beacon overrides on top of the room-wide defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconOverride {
    pub id: Corner,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uuid: Option<Uuid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_1m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advertise_interval_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    #[serde(default = "default_side")]
    pub width: f64,
    #[serde(default = "default_side")]
    pub depth: f64,
    #[serde(default = "default_tx_power")]
    pub tx_power_1m: f64,
    #[serde(default = "default_interval")]
    pub advertise_interval_ms: u64,
    #[serde(default)]
    pub propagation: PropagationParams,
    #[serde(default)]
    pub beacons: Vec<BeaconOverride>,
    #[serde(default = "default_corner_labels")]
    pub corner_labels: [CornerLabel; CORNER_COUNT],
}

fn default_side() -> f64 {
    6.0
}
fn default_tx_power() -> f64 {
    DEFAULT_TX_POWER_1M
}
fn default_interval() -> u64 {
    DEFAULT_ADVERTISE_INTERVAL_MS
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            width: default_side(),
            depth: default_side(),
            tx_power_1m: default_tx_power(),
            advertise_interval_ms: default_interval(),
            propagation: PropagationParams::default(),
            beacons: Vec::new(),
            corner_labels: default_corner_labels(),
        }
    }
}

impl RoomConfig {
    pub fn build(&self) -> Result<RoomModel, ConfigError> {
        if self.advertise_interval_ms == 0 {
            return Err(invalid("room.advertise_interval_ms", "must be > 0"));
        }
        let mut room = RoomModel::with_beacon_defaults(
            self.width,
            self.depth,
            self.propagation,
            self.tx_power_1m,
            self.advertise_interval_ms,
        )?;
        for o in &self.beacons {
            let beacon = &mut room.beacons[o.id.index()];
            if let Some(uuid) = o.uuid {
                beacon.uuid = uuid;
            }
            if let Some(tx) = o.tx_power_1m {
                beacon.tx_power_1m = tx;
            }
            if let Some(interval) = o.advertise_interval_ms {
                beacon.advertise_interval_ms = interval;
            }
        }
        room.corner_labels = self.corner_labels.clone();
        room.validate()?;
        Ok(room)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_tick_rate")]
    pub tick_rate_hz: u32,
    #[serde(default = "default_window")]
    pub window_size: usize,
    /// Question bank; the bundled bank is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questions_path: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub shuffle_answers: bool,
    /// Feedback screen auto-advance; 0 waits for an explicit advance.
    #[serde(default = "default_auto_advance")]
    pub feedback_auto_advance_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_path: Option<PathBuf>,
    /// `stdin` or `tcp:<addr:port>`.
    #[serde(default = "default_live_source")]
    pub live_source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ui_dir: Option<PathBuf>,
    #[serde(default = "default_walk_speed")]
    pub walk_speed_mps: f64,
    #[serde(default)]
    pub room: RoomConfig,
    #[serde(default)]
    pub policy: SelectionPolicy,
}

fn default_seed() -> u64 {
    42
}
fn default_listen() -> String {
    "127.0.0.1:8080".into()
}
fn default_tick_rate() -> u32 {
    10
}
fn default_window() -> usize {
    DEFAULT_WINDOW_SIZE
}
fn default_true() -> bool {
    true
}
fn default_auto_advance() -> u64 {
    3000
}
fn default_live_source() -> String {
    "stdin".into()
}
fn default_walk_speed() -> f64 {
    1.0
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Sim,
            seed: default_seed(),
            listen: default_listen(),
            tick_rate_hz: default_tick_rate(),
            window_size: default_window(),
            questions_path: None,
            shuffle_answers: true,
            feedback_auto_advance_ms: default_auto_advance(),
            replay_path: None,
            live_source: default_live_source(),
            ui_dir: None,
            walk_speed_mps: default_walk_speed(),
            room: RoomConfig::default(),
            policy: SelectionPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiveSource {
    Stdin,
    Tcp(String),
}

impl AppConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: AppConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dump(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=100).contains(&self.tick_rate_hz) {
            return Err(invalid("tick_rate_hz", "must be within [1, 100]"));
        }
        if self.window_size == 0 {
            return Err(invalid("window_size", "must be >= 1"));
        }
        if self.mode == Mode::Replay && self.replay_path.is_none() {
            return Err(invalid("replay_path", "required when mode is replay"));
        }
        if !(self.walk_speed_mps.is_finite() && self.walk_speed_mps > 0.0) {
            return Err(invalid("walk_speed_mps", "must be > 0"));
        }
        self.live_source()?;
        self.policy.validate().map_err(|e| match e {
            crate::localization::LocalizationError::InvalidPolicy { field, reason } => {
                invalid(field, reason)
            }
            other => invalid("policy", other.to_string()),
        })?;
        self.room.build()?;
        Ok(())
    }

    pub fn room_model(&self) -> Result<RoomModel, ConfigError> {
        self.room.build()
    }

    pub fn tick_period_ms(&self) -> u64 {
        (1000 / u64::from(self.tick_rate_hz)).max(1)
    }

    pub fn live_source(&self) -> Result<LiveSource, ConfigError> {
        match self.live_source.as_str() {
            "stdin" => Ok(LiveSource::Stdin),
            s => match s.strip_prefix("tcp:") {
                Some(addr) if !addr.is_empty() => Ok(LiveSource::Tcp(addr.to_string())),
                _ => Err(invalid("live_source", "expected `stdin` or `tcp:<addr:port>`")),
            },
        }
    }

    /// Configuration safe to hand to the browser: no filesystem paths or
    /// listen address.
    pub fn public_view(&self) -> serde_json::Value {
        serde_json::json!({
            "mode": self.mode,
            "tick_rate_hz": self.tick_rate_hz,
            "window_size": self.window_size,
            "shuffle_answers": self.shuffle_answers,
            "feedback_auto_advance_ms": self.feedback_auto_advance_ms,
            "walk_speed_mps": self.walk_speed_mps,
            "room": {
                "width": self.room.width,
                "depth": self.room.depth,
                "corner_labels": self.room.corner_labels,
            },
            "policy": self.policy,
        })
    }
}

/// Reads and validates a config file. Relative paths inside it are
/// resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<AppConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = AppConfig::from_json_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for p in [&mut cfg.questions_path, &mut cfg.replay_path, &mut cfg.ui_dir]
        .into_iter()
        .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}
