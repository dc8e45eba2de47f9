use thiserror::Error;

use crate::stepper::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("coefficient construction rejected: {0}")]
    Construction(String),

    #[error("damage step did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("linear solver breakdown: {reason}")]
    LinearSolver { reason: String, residual_history: Vec<f64> },

    #[error("theorem precondition violated: {0}")]
    TheoremPrecondition(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("run failed at step {step}: {source}")]
    Run { step: usize, source: Box<Error>, partial: Box<Trajectory> },

    #[error("control evaluation failed for coefficients {coeffs:?}: {source}")]
    Control { coeffs: Vec<f64>, source: Box<Error> },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NewtonDivergence { .. } | Error::LinearSolver { .. } | Error::Oracle(_) => true,
            Error::Run { source, .. } | Error::Control { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
