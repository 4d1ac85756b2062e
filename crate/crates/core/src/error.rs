use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("fixed-point iteration did not converge after {iterations} sweeps (last increment {increment:e})")]
    FixedPointNotConverged { iterations: usize, increment: f64 },

    #[error("cell problem at macro point ({x:.6}, {y:.6}) failed: {source}")]
    CellProblem {
        x: f64,
        y: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("solution diverged at step {step} (t = {time})")]
    Diverged { step: usize, time: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of an iterative solver, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SolverNotConverged { .. }
            | Error::FixedPointNotConverged { .. }
            | Error::NonFinite(_) => true,
            Error::CellProblem { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
