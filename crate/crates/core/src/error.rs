use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or mismatched arguments (dimensions, empty inputs).
    #[error("input error: {0}")]
    Input(String),
    /// The value is outside the domain of the operation (e.g. not positive definite).
    #[error("domain error: {0}")]
    Domain(String),
    /// A hyperparameter violates its validity constraint.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// A Monte Carlo or fitting routine could not produce a trustworthy value.
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<S: Into<String>>(msg: S) -> Error {
    Error::Input(msg.into())
}

pub(crate) fn param<S: Into<String>>(msg: S) -> Error {
    Error::Parameter(msg.into())
}
