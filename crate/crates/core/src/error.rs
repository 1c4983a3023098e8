//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("invalid parameter: {0}")]
    ParameterDomain(String),

    /// A data structure violates one of its invariants (e.g. refractory gaps).
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// The jitter propagation at some firing has a non-positive total slope.
    #[error("degenerate firing {index}: total potential slope {slope} is not positive")]
    DegenerateFiring { index: usize, slope: f64 },

    /// An iterative numerical routine hit its iteration cap.
    #[error("solver limit reached: {0}")]
    SolverLimit(String),

    /// Internal inconsistency of the event-driven engine.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
