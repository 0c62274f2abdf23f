use thiserror::Error;

use crate::model::{ModelError, ValidationReport};

#[derive(Debug, Error)]
pub enum MmdpError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("weight table does not match the instance: {0}")]
    StaleWeights(String),
    #[error("return decreased at iteration {iteration}: {previous} -> {current}")]
    NonMonotone {
        iteration: usize,
        previous: f64,
        current: f64,
    },
    #[error("step size must be positive, got {0}")]
    StepSize(f64),
    #[error("{candidates} candidate policies exceed the enumeration limit of {limit}")]
    Intractable { candidates: f64, limit: f64 },
    #[error("posterior is degenerate: every model has zero likelihood")]
    DegeneratePosterior,
    #[error("invalid instance:\n{0}")]
    Invalid(ValidationReport),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
