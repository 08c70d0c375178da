use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HcmError>;

#[derive(Debug, Error)]
pub enum HcmError {
    #[error("invalid community: {0}")]
    InvalidCommunity(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("odd number of half-edges ({0}); a perfect matching needs an even count")]
    OddHalfEdges(u64),

    #[error("invalid pairing: {0}")]
    InvalidPairing(String),

    #[error("malformed exploration trace: {0}")]
    MalformedTrace(String),

    #[error("vertex set is not connected")]
    Disconnected,

    #[error("community has {edges} internal edges; exact enumeration is capped at {cap}")]
    EnumerationCap { edges: usize, cap: usize },

    #[error("E[D] = 0: the criticality parameter is undefined")]
    ZeroMeanDegree,

    #[error("target {target} outside the critical window: {reason}")]
    OutsideWindow { target: f64, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl HcmError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        HcmError::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HcmError::Io {
            path: path.into(),
            source,
        }
    }
}
