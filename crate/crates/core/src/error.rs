use thiserror::Error;

/// Errors produced by scenario loading, model building and solving.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation error on `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("no route from station {from} to station {to} at step {step}")]
    Unreachable { from: usize, to: usize, step: usize },

    #[error("power flow did not converge: mismatch {mismatch:.3e} pu after {iterations} iterations")]
    PowerFlowDiverged { mismatch: f64, iterations: usize },

    #[error("singular power-flow Jacobian at step {step}")]
    SingularJacobian { step: usize },

    #[error("model assembly error: {0}")]
    Assembly(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("internal consistency error: {0}")]
    InternalConsistency(String),

    #[error("transit-infeasible input: {0}")]
    TransitInfeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
