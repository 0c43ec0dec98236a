use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = QelmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QelmError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("infeasible outcome: {0}")]
    Infeasible(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("IDX format error: {0}")]
    Format(String),

    #[error("IDX truncation error: {0}")]
    Truncation(String),

    #[error("encoding capacity exceeded: {0}")]
    Capacity(String),

    #[error("class {0} is not present in the data")]
    MissingClass(u8),

    #[error("configuration error:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<QelmError>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl QelmError {
    pub fn config(msg: impl Into<String>) -> Self {
        QelmError::Config(vec![msg.into()])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QelmError::Io { path: path.into(), source }
    }
}

pub trait ResultExt<T> {
    /// Attaches a human-readable location (config path, sweep point) to an error.
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| QelmError::Context { context: ctx(), source: Box::new(source) })
    }
}
