//! The three frame-to-mel architectures and their checkpoint format.
//!
//! Every model maps one preprocessed `64 × 128` ultrasound frame to an
//! 80-bin mel frame. The Conformer variants read the frame as a sequence of
//! 64 beam lines of 128 samples each; the CNN reads it as an image.

mod checkpoint;
mod cnn;
mod conformer;
mod model;
mod sequence;
mod spec;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry, MANIFEST_FILE, WEIGHTS_FILE};
pub use conformer::conformer_block;
pub use model::{build_forward, count_parameters, Model, PREDICT_BATCH};
pub use sequence::{frames_to_sequence, sequence_to_frames, BeamlineSequence};
pub use spec::{CnnConfig, ConformerBlockConfig, InitRule, ModelKind, ModelSpec, ParamSpec};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Nn(#[from] ultraspeech_nn::NnError),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: std::path::PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, ModelError>;
