use std::path::PathBuf;
use std::time::Duration;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("malformed JSON at byte {offset}: {message}")]
    MalformedJson { offset: usize, message: String },

    #[error("{path}: line {line}: {message}")]
    BadLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("lexicon conflict: {word:?} is listed as both positive and negative")]
    LexiconConflict { word: String },

    #[error("model format error: {0}")]
    Format(String),

    #[error("network error after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },

    #[error("HTTP status {status} from {url}")]
    HttpStatus { status: u16, url: String },

    #[error("rate limited, retry after {}s", retry_after.as_secs_f64())]
    RateLimited { retry_after: Duration },

    #[error("{} not found", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Whether a fetch that failed with this error may be attempted again.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Network { .. } | Error::RateLimited { .. })
    }

    /// Process exit code: 2 config, 3 data, 4 network, 5 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_)
            | Error::MalformedJson { .. }
            | Error::BadLine { .. }
            | Error::LexiconConflict { .. }
            | Error::Format(_)
            | Error::MissingArtifact(_)
            | Error::Io { .. } => 3,
            Error::Network { .. } | Error::RateLimited { .. } | Error::HttpStatus { .. } => 4,
            Error::Internal(_) => 5,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Data(format!("csv: {err}"))
    }
}
