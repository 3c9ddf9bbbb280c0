//! Speaker-specific supervised training of the frame-to-mel models.

mod data;
mod early_stop;
mod optimizer;
mod persist;
mod schedule;
mod trainer;

pub use data::FrameDataset;
pub use early_stop::{EarlyStopper, StopDecision};
pub use optimizer::{optimizer_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use schedule::{learning_rate_at, TrainingSchedule};
pub use trainer::{dataset_mse, train, write_history, EpochRecord, TrainedModel, TrainerConfig, TrainingHistory, HISTORY_FILE};

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Training loss became non-finite; the history up to that point is kept
    /// for diagnosis.
    #[error("training diverged at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: u64, history: Box<TrainingHistory> },
    #[error(transparent)]
    Core(#[from] ultraspeech_core::CoreError),
    #[error(transparent)]
    Model(#[from] ultraspeech_models::ModelError),
    #[error(transparent)]
    Nn(#[from] ultraspeech_nn::NnError),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, TrainingError>;
