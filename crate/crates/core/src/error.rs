use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric: |m[{row},{col}] - m[{col},{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("non-finite log density at observation {obs}, component {component}")]
    NonFiniteDensity { obs: usize, component: usize },

    #[error("group {group}: {source}")]
    Group {
        group: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("precision column {column}: {source}")]
    Column {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid dataset at data row {}, column {}: {msg}", row + 1, col + 1)]
    /// Zero-based coordinates; displayed one-based.
    Cell { row: usize, col: usize, msg: String },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    /// True for failures of the numerics (as opposed to input or I/O problems).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::NotSymmetric { .. }
            | Error::Domain(_)
            | Error::Overflow(_)
            | Error::NonFiniteDensity { .. } => true,
            Error::Group { source, .. } | Error::Column { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn in_group(self, group: usize) -> Error {
        Error::Group {
            group,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_column(self, column: usize) -> Error {
        Error::Column {
            column,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Error {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
