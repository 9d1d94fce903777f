use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario or configuration is not usable.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("CFL violation: dt = {dt} exceeds limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    /// The state lost positivity or finiteness during a step.
    #[error("state lost positivity at t = {t}")]
    Positivity { t: f64 },

    /// A space-time query fell outside the stored history.
    #[error("point (x = {x}, t = {t}) is outside the stored history")]
    OutsideHistory { x: f64, t: f64 },

    /// The initial data do not satisfy the hypotheses of the bounds.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("fit window [{t_a}, {t_b}] is invalid or not covered by the series")]
    Window { t_a: f64, t_b: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
