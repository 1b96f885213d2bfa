use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("undefined integrality gap: integer optimum is zero")]
    UndefinedGap,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
