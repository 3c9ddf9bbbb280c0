//! Paired ultrasound/audio recordings: reading and writing the on-disk
//! layout, deterministic train/dev/test splits and a synthetic corpus
//! generator.

mod recording;
mod split;
mod synthetic;

pub use recording::{load_recording, load_speaker, store_recording, RecordingParams, UltrasoundRecording, ALIGNMENT_TOLERANCE_SECS};
pub use split::{
    is_test_utterance, read_split_manifest, split_corpus, split_utterances, write_split_manifest, CorpusSplit, SplitRecord, SplitRole,
    UtteranceRef, MIN_NON_TEST, TEST_UTTERANCES,
};
pub use synthetic::{band_depths, generate_synthetic_corpus, synthetic_formants, SYNTHETIC_SPEAKER};
