use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },
    #[error("unknown label code {0}")]
    LabelCode(u8),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("no kidney found in label grid")]
    NoKidney,
    #[error("horseshoe or ambiguous kidney layout: {0}")]
    AmbiguousKidneys(String),
    #[error("volume is already normalized")]
    AlreadyNormalized,
    #[error("training data error: {0}")]
    Training(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("csv/json format error: {0}")]
    Format(String),
    #[error("stage `{stage}` failed: {source}")]
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

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) => 2,
            Error::Numeric(_) => 4,
            _ => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
