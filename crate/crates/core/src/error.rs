use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid [{section}] configuration: {reason}")]
    Invalid { section: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl ConfigError {
    pub fn invalid(section: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { section, reason: reason.into() }
    }
}

pub type ConfigResult<T> = Result<T, ConfigError>;

/// Failures of a running simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite {quantity} for neuron {neuron} at t = {time_ms} ms")]
    NonFinite { quantity: &'static str, neuron: usize, time_ms: f64 },
    #[error("checkpoint requested at step {step}, which is not on a synaptic tick")]
    OffTick { step: u64 },
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl SimError {
    /// Whether the run was aborted by the numerics rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, SimError::NonFinite { .. })
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("window {window_s} s must be positive and no longer than the duration {duration_s} s")]
    BadWindow { window_s: f64, duration_s: f64 },
    #[error("bin {bin_s} s must be positive and divide the window {window_s} s")]
    BadBin { bin_s: f64, window_s: f64 },
    #[error("spike at {time_ms} ms from neuron {neuron} is outside the train ({duration_s} s, {n_neurons} neurons)")]
    OutOfRange { time_ms: f64, neuron: u32, duration_s: f64, n_neurons: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}
