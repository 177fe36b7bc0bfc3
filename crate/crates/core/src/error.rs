use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("matrix exponential failed: {0}")]
    Exponential(String),

    #[error("operator is not Hermitian within tolerance (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error(
        "per-step jump probability {probability:e} at step {step} exceeds 0.1; \
         the model is too highly excited for first-order jump sampling"
    )]
    OverExcited { step: usize, probability: f64 },

    #[error("history length {requested} exceeds the configured cap {cap}")]
    CapExceeded { requested: usize, cap: usize },

    #[error("invalid history: {0}")]
    InvalidHistory(String),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
