use std::path::PathBuf;

/// Errors produced by the engine, the learners and the file readers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("action classifier has not been trained")]
    UntrainedModel,

    #[error("cutting-plane training did not converge within {rounds} rounds")]
    NotConverged {
        rounds: usize,
        /// Weights of the last round.
        last: Vec<f64>,
    },

    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },

    #[error("model file: {0}")]
    Model(String),

    #[error("model checksum mismatch or truncated file")]
    Checksum,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
