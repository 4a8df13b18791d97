use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation engine and its stores.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("field diverged at node {node} (x = {x:.6}) on step {step}: |phi| = {value:e}")]
    Divergence {
        step: usize,
        node: usize,
        x: f64,
        value: f64,
    },

    #[error("particle at x = {x:.6} left the grid interior on step {step} (light cone breach)")]
    LightConeBreach { step: usize, x: f64 },

    #[error("causality violated at t = {t:.6}: |beta| = {beta}")]
    Causality { t: f64, beta: f64 },

    #[error("x = {x} is outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("normalization failed: {0}")]
    Normalization(String),

    #[error("window [{t_a}, {t_b}] is too short (need at least {min})")]
    WindowTooShort { t_a: f64, t_b: f64, min: f64 },

    #[error("insufficient zero crossings in window ({found} found, need 2)")]
    InsufficientCrossings { found: usize },

    #[error("time {0} is not a sampled time")]
    NotSampled(f64),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported format version {found} (this build reads major version {supported})")]
    FormatVersion { found: String, supported: u32 },

    #[error("checksum mismatch for {}", .0.display())]
    Checksum(PathBuf),

    #[error("config digest mismatch: stored {stored}, computed {computed}")]
    DigestMismatch { stored: String, computed: String },

    #[error("corrupt archive: {0}")]
    Corrupt(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
