use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A requested rank or shape does not fit the input.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Input values that violate a documented precondition (non-finite entries, bad parameters).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("expected a symmetric adjacency matrix; use coembed for directed or bipartite networks")]
    Asymmetric,

    /// Design matrix is rank deficient. Carries the 0-based column indices involved
    /// in the near-null direction.
    #[error("design matrix is collinear (columns {columns:?}, relative smallest singular value {ratio:.3e})")]
    Collinear { columns: Vec<usize>, ratio: f64 },

    #[error("rank error: {0}")]
    Rank(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("state error: {0}")]
    State(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
