use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("input error: {0}")]
    Input(String),
    #[error("domain error: variable {var} does not admit value {value}")]
    Domain { var: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("property violated: {0}")]
    Property(String),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("serialization: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

impl From<serde_json::Error> for CircuitError {
    fn from(e: serde_json::Error) -> Self {
        CircuitError::Format(e.to_string())
    }
}
