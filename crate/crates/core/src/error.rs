use thiserror::Error;

/// Error type shared by all pipeline stages.
///
/// Variants are grouped by failure class so the CLI can map them to
/// distinct exit codes: configuration, data, training, and I/O.
#[derive(Debug, Error)]
pub enum SpError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input row; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// A stage produced nothing. Distinct from `Data` so callers can
    /// detect over-filtering as opposed to structurally bad input.
    #[error("empty result: {0}")]
    EmptyResult(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error("training {algorithm} failed: {message}")]
    Training { algorithm: String, message: String },

    #[error("model file {path}: {message}")]
    ModelFormat { path: String, message: String },
}

impl SpError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SpError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: u64, message: impl Into<String>) -> Self {
        SpError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SpError>;
