use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate node id `{id}`")]
    DuplicateNode {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A non-finite value appeared while evaluating a numeric map.
    #[error("non-finite value at index {index} during {context}")]
    NonFinite { context: &'static str, index: usize },

    #[error("fixed-point iteration diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDivergence { epoch: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }

    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command-line runner.
    ///
    /// 2 for configuration errors, 3 for data errors and 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 2,
            Error::Parse { .. }
            | Error::DuplicateNode { .. }
            | Error::InvalidData(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 3,
            Error::NonFinite { .. } | Error::Divergence { .. } | Error::TrainingDivergence { .. } => 4,
            Error::Context { source, .. } => source.exit_code(),
        }
    }
}
