use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("spectral tail fraction {fraction:e} above |xi| > nyquist/3 exceeds {limit:e}")]
    SpectralTail { fraction: f64, limit: f64 },

    #[error("solver instability at t = {time}: {reason}")]
    Instability { time: f64, reason: String },

    #[error("picard iteration does not contract: sweep {sweep}, distance {distance:e} after {previous:e}")]
    NonContraction {
        sweep: usize,
        distance: f64,
        previous: f64,
    },

    #[error("zero forcing: duhamel ratio undefined")]
    ZeroForcing,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty report")]
    EmptyReport,

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl LabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::InvalidGrid(_) | LabError::InvalidArgument(_) => 2,
            LabError::Io { .. } | LabError::Format { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
