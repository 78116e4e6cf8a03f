use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// An action value that is not on its grid, or otherwise malformed.
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("episode already finished at t = {0}")]
    EpisodeFinished(usize),
    #[error("cannot digit-encode negative value {0}")]
    NegativeEncoding(f64),
    #[error("index {index} out of range for {len} {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("every action of head {0} is masked")]
    FullyMasked(usize),
    #[error("non-finite loss while updating {agent} policy at update {update}: {detail}")]
    NonFinite {
        agent: &'static str,
        update: usize,
        detail: String,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Whether the error stems from user configuration rather than a runtime
    /// failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidAction(_) | Error::Checkpoint(_)
        )
    }
}
