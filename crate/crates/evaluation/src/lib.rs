//! Objective evaluation and significance statistics.

mod mann_whitney;
mod metrics;
mod mushra;
mod report;

pub use mann_whitney::{mann_whitney_u, mann_whitney_u_with, MannWhitney, PValueMethod, TestMode, EXACT_MAX_TOTAL};
pub use metrics::{sentence_mcd, sentence_mse};
pub use mushra::{mushra_stats, MushraRating, MushraStats, SystemPair, SystemSummary, MUSHRA_POOLING};
pub use report::{build_report, EvaluationReport, SentenceScore, SpeakerCell, SystemScores};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("incompatible input: {0}")]
    IncompatibleInput(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] ultraspeech_core::CoreError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
