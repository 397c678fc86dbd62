use thiserror::Error;

/// Crate-wide error type.
///
/// The variants deliberately mirror how callers react: `Input` and
/// `Config` mean the caller handed us something malformed, `Domain`
/// means an evaluation left the region where the objective is defined,
/// `Numeric` means a computation broke down (non-finite values, loss of
/// positive definiteness, a collapsed mixture component), and the rest
/// are self-describing.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed argument: shape mismatch, non-positive dimension, ...
    #[error("invalid input: {0}")]
    Input(String),

    /// Inconsistent solver or analysis configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The objective (or one of its derivatives) was evaluated outside
    /// its domain, e.g. a log of a non-positive number.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical failure that is not a domain error: overflow to
    /// non-finite values, a matrix that should be positive definite but
    /// is not, a mixture weight collapsing to zero.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Not enough information to produce the requested quantity
    /// (e.g. a convergence trace too short to fit a rate).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A precondition of an analysis routine does not hold.
    #[error("precondition not met: {0}")]
    Precondition(String),

    /// The requested operation is not defined for this problem kind or
    /// file format.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Failure while reading or parsing a data file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
