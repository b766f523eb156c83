use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("query ({x}, {y}, t={t}) is outside the flow domain")]
    OutOfDomain { x: f64, y: f64, t: f64 },

    #[error("malformed flow grid header: {0}")]
    GridHeader(String),

    #[error("flow grid shape mismatch: {0}")]
    GridShape(String),

    #[error("flow grid axis `{0}` is not strictly increasing")]
    GridAxis(&'static str),

    #[error("flow grid contains non-finite sample at index {0}")]
    GridNonFinite(usize),

    #[error("edge state sigma={sigma} is inconsistent with distance {distance} m")]
    InconsistentSigma { sigma: u8, distance: f64 },

    #[error("non-positive inter-agent distance {0} m")]
    NonPositiveDistance(f64),

    #[error("agents {0} and {1} are coincident")]
    CoincidentAgents(usize, usize),

    #[error("matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no value-function guidance at ({x}, {y})")]
    NoGuidance { x: f64, y: f64 },

    #[error("target disc contains no grid node")]
    EmptyTarget,

    #[error("initial swarm is not connected")]
    InitiallyDisconnected,

    #[error("mission sampling budget exhausted after {attempts} rejections: {histogram}")]
    SamplingExhausted { attempts: usize, histogram: String },

    #[error("all {0} missions failed")]
    BatchFailed(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
