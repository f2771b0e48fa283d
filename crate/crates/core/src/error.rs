use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("channel {channel} is constant, cannot normalize")]
    ConstantChannel { channel: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("invalid patch region: {0}")]
    InvalidRegion(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("dataset has {size} images, need at least 2")]
    DatasetTooSmall { size: usize },

    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("dense solve rejected: {unknowns} unknowns exceeds limit of {limit}")]
    DenseTooLarge { unknowns: usize, limit: usize },

    #[error("singular system")]
    Singular,

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("score map is empty")]
    EmptyMap,

    #[error("top-k count {k} invalid for {len} pixels")]
    BadK { k: usize, len: usize },

    #[error("no positive samples")]
    NoPositives,

    #[error("empty input")]
    EmptyInput,

    #[error("need at least 2 input images, found {found}")]
    InsufficientInputs { found: usize },

    #[error("input {path} has shape {found:?}, expected {expected:?}")]
    ShapeHeterogeneity {
        path: PathBuf,
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
