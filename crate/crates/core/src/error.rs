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

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("non-finite value {value} at channel {channel}, timestamp {timestamp}")]
    NonFinite {
        channel: usize,
        timestamp: usize,
        value: f64,
    },

    #[error("{0}: file is empty")]
    EmptyFile(PathBuf),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training diverged in layer {layer} at epoch {epoch}: {reason}")]
    TrainingDiverged {
        layer: usize,
        epoch: usize,
        reason: String,
    },

    #[error("metric undefined: {0}")]
    Undefined(&'static str),

    #[error("data outside the domain of the {cost} cost: {reason}")]
    Domain { cost: &'static str, reason: String },

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that stem from numerical behaviour rather than
    /// from bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::TrainingDiverged { .. })
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
