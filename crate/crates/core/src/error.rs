use thiserror::Error;

/// Errors raised by geometric operations and their input validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("space mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid isometry: {0}")]
    InvalidIsometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("chain is not nested at position {index}")]
    NotNested { index: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;
