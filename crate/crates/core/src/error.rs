use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("linear system is singular or not positive definite: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
