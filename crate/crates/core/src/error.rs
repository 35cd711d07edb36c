use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A domain or experiment is configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),
    /// A set or mask is empty where a nonempty one is required.
    #[error("empty set: {0}")]
    EmptySet(String),
    /// The grid is too coarse for the requested operation.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// No discrete subsolution could be constructed.
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    /// A numeric parameter is out of its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// The requested case is outside what the toolkit evaluates.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A documented precondition of the operation does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
