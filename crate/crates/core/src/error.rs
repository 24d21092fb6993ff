use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported or malformed image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("malformed flow data: {0}")]
    Format(String),

    /// Raised by the solver when an iterate stops being finite. `residuals`
    /// holds the relative residual history up to the failure.
    #[error("numerical failure after {iterations} iterations: {message}")]
    Numerical {
        message: String,
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error(transparent)]
    External(#[from] ExternalError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures of an out-of-process denoiser.
#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("failed to spawn denoiser `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("denoiser did not reply within {seconds} s")]
    Timeout { seconds: f64 },

    #[error("malformed denoiser reply: {0}")]
    MalformedReply(String),

    #[error("denoiser reply has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },

    #[error("denoiser pipe error: {0}")]
    Pipe(#[source] std::io::Error),

    #[error("denoiser exited before replying")]
    Exited,

    #[error("external command failed: {0}")]
    Failed(String),
}
