use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("singular design matrix for target `{0}`")]
    SingularMatrix(String),

    #[error("numerical blow-up at row {row}")]
    NonFiniteState { row: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("duplicate impact vector for target `{0}`")]
    DuplicateTarget(String),

    #[error("reference network has no edges")]
    EmptyReference,

    #[error("model serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerics rather than bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix(_)
                | Error::NonFiniteState { .. }
                | Error::UndefinedCorrelation(_)
        )
    }
}
