//! Mel spectrogram to waveform.
//!
//! Two backends share one entry point: an adapter that hands the mel to a
//! pretrained neural vocoder living outside this workspace, and a built-in
//! filterbank inversion plus Griffin-Lim phase reconstruction used for
//! desk-scale runs and tests.

mod external;
mod fallback;
mod resample;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use ultraspeech_core::dsp::{MelSpectrogram, TARGET_SAMPLE_RATE};
use ultraspeech_core::AudioClip;

pub use external::ExternalVocoder;
pub use fallback::{invert_mel_magnitudes, GriffinLim, DEFAULT_ITERATIONS};
pub use resample::resample_mel_for_vocoder;

/// Native hop of the common 22.05 kHz neural vocoder configurations.
pub const DEFAULT_VOCODER_HOP: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum VocoderError {
    #[error("vocoder backend unavailable: {0}")]
    BackendMissing(String),
    #[error("vocoder backend failed: {0}")]
    BackendFailed(String),
    #[error("invalid vocoder input: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] ultraspeech_core::CoreError),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, VocoderError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    External,
    Fallback,
}

impl FromStr for BackendKind {
    type Err = VocoderError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(Self::External),
            "fallback" => Ok(Self::Fallback),
            other => Err(VocoderError::Input(format!("unknown vocoder backend `{other}` (expected external or fallback)"))),
        }
    }
}

/// Settings read from the `vocoder.*` configuration keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocoderConfig {
    pub backend: BackendKind,
    /// Executable of the external backend.
    pub cmd: Option<String>,
    pub hop: usize,
    pub sample_rate: u32,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for VocoderConfig {
    fn default() -> Self {
        Self { backend: BackendKind::Fallback, cmd: None, hop: DEFAULT_VOCODER_HOP, sample_rate: TARGET_SAMPLE_RATE, iterations: DEFAULT_ITERATIONS, seed: 0 }
    }
}

pub enum Vocoder {
    External(ExternalVocoder),
    Fallback(GriffinLim),
}

impl Vocoder {
    /// Builds the configured backend. Selecting the external backend
    /// without a command is an error; there is no silent fallback.
    pub fn from_config(cfg: &VocoderConfig) -> Result<Self> {
        match cfg.backend {
            BackendKind::External => {
                let cmd = cfg.cmd.as_deref().ok_or_else(|| VocoderError::BackendMissing("vocoder.cmd is not set".into()))?;
                Ok(Self::External(ExternalVocoder::new(cmd, cfg.sample_rate)))
            }
            BackendKind::Fallback => Ok(Self::Fallback(GriffinLim::new(cfg.sample_rate, cfg.hop, cfg.iterations, cfg.seed))),
        }
    }

    /// Waveform for an unnormalized log-mel at the backend's hop. Output is
    /// scaled down when its peak exceeds full scale.
    pub fn synthesize(&self, mel: &MelSpectrogram) -> Result<AudioClip> {
        if mel.is_normalized() {
            return Err(VocoderError::Input("mel must be destandardized before synthesis".into()));
        }
        if mel.frames() == 0 {
            return Err(VocoderError::Input("empty mel".into()));
        }
        match self {
            Self::External(v) => v.synthesize(mel),
            Self::Fallback(v) => v.synthesize(mel),
        }
    }
}
