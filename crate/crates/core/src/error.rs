use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("scene parse error at line {line}, column {column}: {message}")]
    SceneParse { line: usize, column: usize, message: String },

    #[error("invalid scene: {field}: {message}")]
    SceneValidation { field: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite network input at index {0}")]
    NonFiniteInput(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("malformed image file: {0}")]
    Image(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::SceneValidation { field: field.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
