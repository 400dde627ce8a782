use thiserror::Error;

/// Errors produced by model loading and the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Model(String),

    #[error("singular load-bus susceptance submatrix (buses: {})", .0.join(", "))]
    SingularLoadSubmatrix(Vec<String>),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("non-finite state encountered at t = {t} s")]
    NonFiniteState { t: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn model(message: impl Into<String>) -> Self {
        Error::Model(message.into())
    }
}
