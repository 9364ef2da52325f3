use thiserror::Error;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("cone violation at node {node} (rho = {rho}): {what}")]
    ConeViolation { node: usize, rho: f64, what: String },

    #[error("non-finite values produced at s = {s}")]
    NumericalBlowup { s: f64 },

    #[error("step size underflow at s = {s} (dt = {dt:e})")]
    StepUnderflow { s: f64, dt: f64 },

    #[error("curvature formulas disagree by {discrepancy:.3e} (relative) at rho = {rho}")]
    FormulaMismatch { discrepancy: f64, rho: f64 },

    #[error("shooting integral has no sign change for c in [1e-6, 1e6]")]
    BracketError,

    #[error("soliton profile is not positive at x = {x}")]
    PositivityLoss { x: f64 },

    #[error("weighted potential attains its minimum at boundary node {node}")]
    VertexAtBoundary { node: usize },

    #[error("operation needs a contraction run, got {0}")]
    WrongSingularityType(String),

    #[error("run stopped at s = {s_max}; classification needs s >= 6")]
    Inconclusive { s_max: f64 },

    #[error("at s = {s}: {source}")]
    AtTime { s: f64, source: Box<Error> },
}

impl Error {
    pub(crate) fn input(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at(self, s: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                s,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any time annotation stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
