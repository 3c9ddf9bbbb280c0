use ultraspeech_core::dsp::MelStats;
use ultraspeech_core::features::{Utterance, FRAME_LEN};
use ultraspeech_core::N_MELS;

use crate::{Result, TrainingError};

/// Frame/mel-frame pairs pooled over utterances, targets standardized.
#[derive(Clone, Debug)]
pub struct FrameDataset {
    frames: Vec<f32>,
    targets: Vec<f32>,
}

impl FrameDataset {
    pub fn from_utterances(utterances: &[Utterance], stats: &MelStats) -> Result<Self> {
        let total: usize = utterances.iter().map(Utterance::n_frames).sum();
        if total == 0 {
            return Err(TrainingError::Config("no frames to train on".into()));
        }
        let mut frames = Vec::with_capacity(total * FRAME_LEN);
        let mut targets = Vec::with_capacity(total * N_MELS);
        for u in utterances {
            if u.frames.len() != u.n_frames() * FRAME_LEN {
                return Err(TrainingError::Config(format!("{}: frame data does not match {} mel frames", u.id.utterance, u.n_frames())));
            }
            frames.extend_from_slice(&u.frames);
            targets.extend(u.mel.standardize(stats)?.values().iter().map(|&v| v as f32));
        }
        Ok(Self { frames, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len() / N_MELS
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn frames(&self) -> &[f32] {
        &self.frames
    }

    pub fn targets(&self) -> &[f32] {
        &self.targets
    }

    /// Copies the pairs at `indices` into the two buffers.
    pub fn gather(&self, indices: &[usize], frames: &mut Vec<f32>, targets: &mut Vec<f32>) {
        frames.clear();
        targets.clear();
        for &i in indices {
            frames.extend_from_slice(&self.frames[i * FRAME_LEN..(i + 1) * FRAME_LEN]);
            targets.extend_from_slice(&self.targets[i * N_MELS..(i + 1) * N_MELS]);
        }
    }
}
