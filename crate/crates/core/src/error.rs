use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema file {path} not found")]
    SchemaNotFound { path: PathBuf },

    #[error("invalid schema {path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("malformed data at row {row}, column {column:?}: {message}")]
    MalformedData {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset {name:?} has no usable rows")]
    EmptyDataset { name: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },

    #[error("cannot allocate {total_hidden} hidden units over {clusters} branches")]
    InfeasibleAllocation { total_hidden: usize, clusters: usize },

    #[error("training diverged at epoch {epoch}, batch {batch} (non-finite {what})")]
    Divergence {
        epoch: usize,
        batch: usize,
        what: &'static str,
    },

    #[error("no rows with missing features; the test set would be empty")]
    EmptyTestSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot tabulate reports with different metrics ({first} and {second})")]
    MixedMetrics { first: String, second: String },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
