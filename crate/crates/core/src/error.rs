use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = TrajkitError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TrajkitError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("training diverged at epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed ({artifact}): {source}")]
    Stage {
        stage: String,
        artifact: String,
        #[source]
        source: Box<TrajkitError>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<TrajkitError>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TrajkitError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TrajkitError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        TrajkitError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Validation errors are caused by bad input rather than by a failing
    /// computation. The CLI maps them to exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        match self {
            TrajkitError::Parse { .. }
            | TrajkitError::Format(_)
            | TrajkitError::InvalidArgument(_)
            | TrajkitError::Shape(_)
            | TrajkitError::Unsupported(_)
            | TrajkitError::Config(_)
            | TrajkitError::Json(_) => true,
            TrajkitError::Context { source, .. } | TrajkitError::Stage { source, .. } => {
                source.is_validation()
            }
            _ => false,
        }
    }
}
