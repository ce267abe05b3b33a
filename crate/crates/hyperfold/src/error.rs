use thiserror::Error;

/// Errors surfaced by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input left the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated; the message names the bound.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative routine failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Requested sampling cannot resolve the oscillation.
    #[error("under-resolved sampling: need at least {required} nodes, got {got}")]
    Resolution { required: usize, got: usize },

    /// Configuration problems; every violation is listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
