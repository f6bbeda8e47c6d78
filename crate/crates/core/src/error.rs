use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular tridiagonal system: pivot {pivot} at index {index} is below threshold")]
    SingularSystem { index: usize, pivot: f64 },

    #[error("singular system at time step {step}: pivot {pivot} at index {index}")]
    SingularStep { step: usize, index: usize, pivot: f64 },

    #[error("initial data is not compatible with the boundary conditions: u0({x}) = {value}")]
    IncompatibleInitialData { x: f64, value: f64 },

    #[error("problem has no exact solution attached")]
    MissingExactSolution,

    #[error("step index {index} outside the admissible range {lo}..={hi}")]
    StepOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("Newton iteration did not converge at step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { step: usize, iterations: usize, residual: f64 },

    #[error("trajectory must be recorded with stride 1 (got {0})")]
    StrideNotOne(usize),

    #[error("order estimation: {0}")]
    OrderFit(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// Attaches the time step index to a singular-system error raised by a solve.
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::SingularSystem { index, pivot } => Error::SingularStep { step, index, pivot },
            other => other,
        }
    }
}
