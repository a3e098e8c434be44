use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}: row {row}: {message}")]
    Parse {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("{0}: input is empty")]
    EmptyInput(String),

    #[error("observation {id}: only {retained} points inside the focal area (need {required})")]
    InsufficientCoverage {
        id: String,
        retained: usize,
        required: usize,
    },

    #[error("no points within {radius} m of ({x:.3}, {y:.3})")]
    EmptyFootprint { x: f64, y: f64, radius: f64 },

    #[error("missing point cloud for observation(s): {}", .0.join(", "))]
    MissingClouds(Vec<String>),

    #[error("percentile mismatch: config declares {config:?}, observations header has {header:?}")]
    PercentileMismatch { config: Vec<f64>, header: Vec<f64> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("chain initialization failed: {0}")]
    Init(String),

    #[error("{} check(s) failed: {}", .0.len(), .0.join(", "))]
    ChecksFailed(Vec<String>),

    #[error("{0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(source_name: impl Into<String>, row: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            row,
            message: message.into(),
        }
    }

    /// Process exit code: 1 for bad input or configuration, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Internal(_) | Error::EmptyFootprint { .. } => 2,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Internal(format!("json: {e}"))
    }
}
