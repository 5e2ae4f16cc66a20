use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LssError> = std::result::Result<T, E>;

/// Errors raised anywhere in the signature pipeline.
#[derive(Debug, Error)]
pub enum LssError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("input is empty")]
    Empty,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("constant series has no dynamic range to normalize")]
    ConstantSeries,

    #[error("values outside the unit interval: {0}")]
    NotNormalized(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("timestamp {t} lacks {needed} windows of history")]
    InsufficientHistory { t: usize, needed: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("unsupported format version: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate scaling region: {0}")]
    DegenerateScaling(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<LssError>,
    },
}

impl LssError {
    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        LssError::File {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        LssError::InvalidParameter(msg.into())
    }

    /// Process exit code: 2 validation, 3 I/O, 4 numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            LssError::Stage { source, .. } => source.exit_code(),
            LssError::File { .. } | LssError::Io(_) => 3,
            LssError::Divergence(_) | LssError::NonFinite(_) => 4,
            _ => 2,
        }
    }
}

/// Attach a pipeline stage name to an error.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| LssError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
