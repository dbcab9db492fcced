use thiserror::Error;

/// Errors raised while configuring, building or running a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("dimension {dim} exceeds the configured cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("incompatible space: {0}")]
    IncompatibleSpace(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("step size underflow at t = {t:.6e} µs (h = {h:.3e}); the problem looks stiff, try the matrix-exponential method")]
    StepUnderflow { t: f64, h: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
