use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("covariance not PSD")]
    NotPsd,

    #[error("invalid probability {0}: must lie strictly between 0 and 1")]
    InvalidProbability(f64),

    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid mission: {0}")]
    InvalidMission(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("infeasible decision vector: max violation {violation:.3e} at {worst}")]
    Infeasible { violation: f64, worst: String },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("spec hash mismatch: plan was made for {plan}, mission hashes to {mission}")]
    HashMismatch { plan: String, mission: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
