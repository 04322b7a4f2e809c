use thiserror::Error;

/// Errors raised by kernel operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid mesh: {0}")]
    Validity(String),
    #[error("boolean operation did not converge after {attempts} attempts: {reason}")]
    Robustness { attempts: u32, reason: String },
    #[error("{0}")]
    Semantic(String),
    #[error("combine produced an empty solid")]
    EmptyResult,
    #[error("capacity exceeded: {what} limit is {limit}")]
    Capacity { what: &'static str, limit: usize },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("nothing to {0}")]
    Boundary(&'static str),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("placement failed: {0}")]
    Placement(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
