use thiserror::Error;

/// Errors raised by the library.
///
/// The variants are grouped so a front end can map them onto process exit
/// codes: see [`Error::class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("point lies within {distance:e} of a pole")]
    PoleProximity { distance: f64 },

    #[error("orbit hits a pole of the map")]
    Pole,

    #[error("word is not admissible: {0}")]
    Inadmissible(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("budget exceeded: {what} needs about {estimate:e} items, budget is {budget}")]
    BudgetExceeded {
        what: String,
        estimate: f64,
        budget: u64,
    },

    #[error("system is reducible: {0}")]
    Reducible(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse error class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Budget,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::BudgetExceeded { .. } => ErrorClass::Budget,
            Error::NonConvergence(_)
            | Error::InsufficientData(_)
            | Error::Pole
            | Error::PoleProximity { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Validation,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
