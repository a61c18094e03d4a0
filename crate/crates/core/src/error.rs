use thiserror::Error;

/// Errors raised by the numerical layers of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Depth data that violates the positivity invariant.
    #[error("invalid depth: {0}")]
    Validity(String),

    /// A numerical procedure produced a non-finite or singular result.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// An iterative method stopped at its iteration cap.
    #[error("no convergence after {iterations} iterations (achieved {achieved:.3e})")]
    NonConvergence { iterations: usize, achieved: f64 },

    /// Two quantities that must agree by construction do not.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The grid does not resolve the requested scale.
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A ray reached a point where its Hamiltonian is not smooth.
    #[error("singular ray: {0}")]
    Singularity(String),

    #[error("degenerate fan: {0}")]
    Degenerate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
