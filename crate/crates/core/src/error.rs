use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {vertex} is isolated; the normalized Laplacian needs positive degree")]
    IsolatedVertex { vertex: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("lambda_max mismatch: operator has {operator}, filter expects {filter}")]
    LambdaMaxMismatch { operator: f64, filter: f64 },

    #[error("graph has {n} vertices; the exact path is capped at {cap} (use the fast transform)")]
    TooLarge { n: usize, cap: usize },

    #[error("numerically rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular system in band {band}")]
    Singular { band: usize },

    #[error("cannot draw {requested} samples from a distribution supported on {support} vertices")]
    InsufficientSupport { requested: usize, support: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cache of {reals} reals ({bytes} bytes) could not be allocated")]
    Allocation { reals: usize, bytes: usize },

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by the caller's input rather than by a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::RankDeficient(_)
                | Error::Singular { .. }
                | Error::Degenerate(_)
                | Error::Allocation { .. }
        )
    }
}
