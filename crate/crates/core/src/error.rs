use thiserror::Error;

/// Errors raised by the solver library.
///
/// Scalar payloads are stored as `f64` so the error type does not depend on
/// the scalar the solver runs in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },

    #[error("positivity violated at node {index:?}: value {value}")]
    Positivity { index: Option<usize>, value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("profile ingestion failed: {0}")]
    Profile(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
