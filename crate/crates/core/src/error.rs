use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite or out-of-range numeric input: {0}")]
    NumericInput(String),
    #[error("insufficient audio: {0}")]
    InsufficientAudio(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate statistics: {0}")]
    DegenerateStats(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("incompatible inputs: {0}")]
    IncompatibleInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Wav { path: PathBuf, source: hound::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
}

impl CoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io { path: path.into(), source }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CoreError::MalformedFile { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
