use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step size underflow at x = {x} (coefficient singularity?)")]
    StepUnderflow { x: f64 },

    #[error("state overflow at x = {x} despite rescaling")]
    Overflow { x: f64 },

    #[error("x = {x} lies outside the open interval ({a}, {b})")]
    OutOfInterval { x: f64, a: f64, b: f64 },

    #[error("matrix is ill-conditioned at x = {x} (condition estimate {cond:.3e})")]
    Conditioning { x: f64, cond: f64 },

    #[error("matrix is singular at x = {x}")]
    Singular { x: f64 },

    #[error("states are at different positions ({0} vs {1})")]
    PositionMismatch(f64, f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature failed on [{a}, {b}]: {reason}")]
    Quadrature { a: f64, b: f64, reason: String },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("solution vanishes at x = {x}")]
    Vanishing { x: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("square-root branch is ambiguous: {0}")]
    BranchAmbiguity(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::Overflow { .. }
                | Error::Conditioning { .. }
                | Error::Singular { .. }
                | Error::Quadrature { .. }
                | Error::NonConvergence(_)
                | Error::Vanishing { .. }
        )
    }
}
