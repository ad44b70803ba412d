use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("point {point:?} leaves the chart at t = {time}")]
    OutOfChart { point: Vec<f64>, time: f64 },
    #[error("degenerate structure: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("form is not closed: {0}")]
    NotClosed(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GeomError>;

pub(crate) fn invalid(msg: impl Into<String>) -> GeomError {
    GeomError::Invalid(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> GeomError {
    GeomError::Precondition(msg.into())
}
