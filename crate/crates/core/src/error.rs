use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("field is not square-integrable: {0}")]
    NotSquareIntegrable(String),

    #[error("non-integrable tail: {0}")]
    NonIntegrableTail(String),

    #[error("existence guard violated: gamma = {gamma}, mu = {mu}")]
    ExistenceGuard { gamma: f64, mu: f64 },

    #[error("boundary condition not satisfied: relative mismatch {mismatch:e}")]
    BoundaryCondition { mismatch: f64 },

    #[error("nonlinear step failed to converge at node {node} (residual {residual:e})")]
    StepFailure { node: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
