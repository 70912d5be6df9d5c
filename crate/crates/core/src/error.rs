use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the trajectory-following library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid trajectory: {}", .0.join("; "))]
    InvalidTrajectory(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error("incompatible window: {0}")]
    IncompatibleWindow(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("gradient check failed: max relative error {max_rel_error:e} exceeds {tol:e}")]
    GradCheckFailed { max_rel_error: f64, tol: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input or configuration, as opposed
    /// to failures while running the pipeline.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::UnknownScenario(_) | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
