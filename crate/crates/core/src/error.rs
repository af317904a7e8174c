use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the preprocessing, regression and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("contact patch not found in rotation {rotation}: {reason}")]
    PatchDetection { rotation: u64, reason: String },

    #[error("invalid patch window: {0}")]
    InvalidWindow(String),

    #[error("ill-conditioned covariance matrix: {0}")]
    IllConditioned(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("normalization undefined: {0}")]
    UndefinedNormalization(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}:{line}:{column}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: {source}")]
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

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Whether the failure comes from the numerics (factorization, optimizer)
    /// rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned(_)
                | Error::Optimization(_)
                | Error::UndefinedNormalization(_)
                | Error::UndefinedCorrelation(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
