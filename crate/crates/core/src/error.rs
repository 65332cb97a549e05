//! Error type shared across the crate.
//!
//! Validation problems (bad dimensions, malformed files, inconsistent
//! configuration) map to exit code 1; runtime failures (I/O, divergence,
//! non-finite arithmetic) map to exit code 2.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("basis dimension must be at least 1")]
    InvalidDimension,

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("evaluation point {x} outside [0, 1]")]
    OutOfDomain { x: f64 },

    #[error("function value at x = {x} is not finite")]
    NonFinite { x: f64 },

    #[error("Gram matrix is numerically singular (rcond = {rcond:.3e})")]
    SingularGram { rcond: f64 },

    #[error(
        "design matrix is rank deficient (rcond = {rcond:.3e}); \
         set ridge > 0 to regularize"
    )]
    RankDeficient { rcond: f64 },

    #[error("{samples} samples cannot determine {dim} coefficients")]
    Underdetermined { samples: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("empty data")]
    EmptyData,

    #[error("coordinate vector for basis '{got}' used with basis '{expected}'")]
    BasisMismatch { expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("optimization diverged at restart {restart}, iteration {iteration}")]
    Divergence { restart: usize, iteration: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("curve '{id}': sample points must be strictly increasing (x = {x})")]
    CurveOrdering { id: String, x: f64 },

    #[error("invalid configuration:\n{}", issues.join("\n"))]
    Config { issues: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for command line front ends.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Divergence { .. } | Error::NonFinite { .. } => 2,
            _ => 1,
        }
    }

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
