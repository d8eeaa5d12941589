use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension {dimension} needs {required_bytes} bytes, budget is {budget_bytes} bytes")]
    Capacity {
        dimension: usize,
        required_bytes: u64,
        budget_bytes: u64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("eigensolver failed for d_H={dimension} ({params}): {reason}")]
    Eigensolver {
        dimension: usize,
        params: String,
        reason: String,
    },

    #[error("spectrum file {path}: {reason}")]
    SpectrumFormat { path: PathBuf, reason: String },

    #[error("unsupported spectrum file version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("spectrum parameters do not match the expected model parameters")]
    ParamsMismatch,

    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },

    #[error("energy {energy} outside the open spectral range ({lo}, {hi})")]
    EnergyOutOfRange { energy: f64, lo: f64, hi: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("smoothed density of states is non-positive at E={energy}")]
    OutOfDomain { energy: f64 },

    #[error("smoothed staircase is not monotone inside the window near E={energy}")]
    NonMonotone { energy: f64 },

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("sweep point M_s={m_sites}, N_B={n_bath}, W_BB={w_bb}: {source}")]
    Sweep {
        m_sites: usize,
        n_bath: usize,
        w_bb: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
