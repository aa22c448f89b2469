use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Quadrature or evaluation produced a non-finite or out-of-budget value.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Arrival rate at or above a service rate.
    #[error("unstable parameters: lambda = {lambda} must be below min(mu_t, mu_c) = {mu_min}")]
    Stability { lambda: f64, mu_min: f64 },
    /// An argument lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),
    /// Density requested for a law without one.
    #[error("{0} has no density")]
    NoDensity(String),
    /// Malformed grid or record file.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
