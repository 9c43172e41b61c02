use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown identifier `{0}`")]
    UnknownId(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("inconsistent seed: {0}")]
    InconsistentSeed(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("schema violation at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn pre(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
