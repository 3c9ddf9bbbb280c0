//! MUSHRA listening tests: stimulus preparation, seeded sessions with
//! anonymized conditions, durable rating storage and the HTTP front end.

mod experiment;
mod http;
mod prepare;
mod service;
mod store;

use std::path::PathBuf;

pub use experiment::{condition_label, Experiment, Manifest, StimulusSet, ANCHOR, HIDDEN_REFERENCE};
pub use http::{router, serve, SharedService};
pub use prepare::{prepare_experiment, PrepareConfig, DEFAULT_ANCHOR_LEVEL, DEFAULT_UTTERANCES_PER_SPEAKER, MANIFEST_FILE};
pub use service::{
    AudioSlot, MushraReport, MushraService, NextTrial, RatingAck, RatingRecord, SessionInfo, SpeakerPanel, TrialPayload, REFERENCE_SLOT,
};
pub use store::{Event, RecordLog, LOG_FILE};

#[derive(Debug, thiserror::Error)]
pub enum MushraError {
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid ratings: {0}")]
    Validation(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("no ratings recorded for experiment {0}")]
    EmptyReport(String),
    #[error("record log {path}: {message}")]
    Log { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] ultraspeech_core::CoreError),
    #[error(transparent)]
    Eval(#[from] ultraspeech_evaluation::EvalError),
}

pub type Result<T> = std::result::Result<T, MushraError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> MushraError {
    let path = path.into();
    move |source| MushraError::Io { path, source }
}
