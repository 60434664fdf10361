use thiserror::Error;

pub type Result<T> = std::result::Result<T, FlowError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FlowError {
    #[error("degree error: {0}")]
    Degree(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A probability density whose integral is not 1 within tolerance.
    #[error("normalization error: density integrates to {measured}")]
    Normalization { measured: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    /// Iterative solver or relaxation failure. `trace` carries whatever
    /// diagnostic history was recorded up to the failure.
    #[error("numerical failure: {message}")]
    Numerical { message: String, trace: Vec<f64> },

    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl FlowError {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        FlowError::Numerical {
            message: message.into(),
            trace: Vec::new(),
        }
    }
}
