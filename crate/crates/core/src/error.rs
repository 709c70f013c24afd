use thiserror::Error;

/// A domain invariant was violated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {field}: {reason}")]
pub struct ValidationError {
    pub field: String,
    pub reason: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("value must be a non-negative number, got {0}")]
    Negative(f64),
    #[error("malformed IPv4 address: {0:?}")]
    MalformedAddress(String),
}
