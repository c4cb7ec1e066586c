use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An index, horizon or parameter lies outside the domain where the
    /// quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested operation is not available for this operator kind.
    #[error("capability error: {0}")]
    Capability(String),
    /// A loop or search exceeded its evaluation budget.
    #[error("budget exhausted: {0}")]
    Budget(String),
    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge (achieved error estimate {achieved:e})")]
    Quadrature { achieved: f64 },
    /// A literal or configuration value could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
