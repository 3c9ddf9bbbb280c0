use std::path::Path;
use std::process::Command;
use std::sync::Mutex;

use log::warn;
use ultraspeech_core::dsp::{write_mel_bin, MelSpectrogram};
use ultraspeech_core::AudioClip;

use crate::{Result, VocoderError};

/// Adapter for a pretrained vocoder run as `<cmd> --in mel.bin --out out.wav`.
///
/// The mel is handed over in the workspace's binary mel format at the
/// vocoder's native hop; the command must write a PCM WAV file. Calls
/// through one handle are serialized.
pub struct ExternalVocoder {
    cmd: String,
    sample_rate: u32,
    lock: Mutex<()>,
}

impl ExternalVocoder {
    pub fn new(cmd: impl Into<String>, sample_rate: u32) -> Self {
        Self { cmd: cmd.into(), sample_rate, lock: Mutex::new(()) }
    }

    pub fn command(&self) -> &str {
        &self.cmd
    }

    pub fn synthesize(&self, mel: &MelSpectrogram) -> Result<AudioClip> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = tempfile::tempdir().map_err(|e| VocoderError::Io { path: std::env::temp_dir(), source: e })?;
        let input = dir.path().join("mel.bin");
        let output = dir.path().join("out.wav");
        write_mel_bin(&input, mel)?;
        let result = Command::new(&self.cmd).arg("--in").arg(&input).arg("--out").arg(&output).output();
        let out = match result {
            Ok(out) => out,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound || e.kind() == std::io::ErrorKind::PermissionDenied => {
                return Err(VocoderError::BackendMissing(format!("cannot run `{}`: {e}", self.cmd)));
            }
            Err(e) => return Err(VocoderError::BackendFailed(format!("`{}`: {e}", self.cmd))),
        };
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(VocoderError::BackendFailed(format!("`{}` exited with {}: {}", self.cmd, out.status, stderr.trim())));
        }
        read_output(&output, self.sample_rate)
    }
}

fn read_output(path: &Path, expected_rate: u32) -> Result<AudioClip> {
    if !path.exists() {
        return Err(VocoderError::BackendFailed(format!("no waveform written to {}", path.display())));
    }
    let (samples, rate) = AudioClip::read_wav_raw(path)?;
    if rate != expected_rate {
        warn!("external vocoder wrote {rate} Hz audio, expected {expected_rate} Hz");
    }
    Ok(AudioClip::limited(samples, rate)?)
}
