use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("linear solve failed after {iterations} iterations (relative residual {residual:e})")]
    SolveFailure { iterations: usize, residual: f64 },
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("exponential fit undefined: {0}")]
    FitUndefined(String),
    #[error("constant estimate failed: {0}")]
    EstimateFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
