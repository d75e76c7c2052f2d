use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid file format: {message}")]
    Format { path: PathBuf, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training data for a binary problem contains only one label")]
    SingleClass,

    #[error("solver did not converge after {iterations} iterations (max violation {violation:.3e}, tol {tol:.1e})")]
    NotConverged {
        iterations: usize,
        violation: f64,
        tol: f64,
    },

    #[error("class `{class}` has {count} members, fewer than {folds} folds")]
    ClassTooSmall {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("class `{class}`: {source}")]
    ClassFit {
        class: String,
        #[source]
        source: Box<Error>,
    },

    #[error("artifact mismatch: {0}")]
    Artifact(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn for_class(class: &str, source: Error) -> Self {
        Error::ClassFit {
            class: class.to_string(),
            source: Box::new(source),
        }
    }
}
