use thiserror::Error;

/// Failures reported by the library.
///
/// Validation failures (bad input, preconditions) and numerical failures are
/// kept apart so front ends can map them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("discretization error: {0}")]
    Discretization(String),
    #[error("not an almost complex structure: {0}")]
    NotAStructure(String),
    #[error("chart error: {0}")]
    Chart(String),
    #[error("admissibility violated: margin {margin:.3e} < {required:.3e} at {point:?}")]
    AdmissibilityViolation {
        margin: f64,
        required: f64,
        point: Vec<(f64, f64)>,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("stabilization failed: {0}")]
    Stabilization(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("certificate mismatch: {0}")]
    Certificate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotAStructure(_)
                | Error::Chart(_)
                | Error::Precondition(_)
                | Error::Coverage(_)
                | Error::Parse(_)
                | Error::InvalidInput(_)
                | Error::Io(_)
                | Error::AdmissibilityViolation { .. }
                | Error::Domain(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
