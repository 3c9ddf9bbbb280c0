//! Model-ready features: resized, normalized frames paired with log-mel
//! targets at one mel frame per ultrasound frame.

use std::path::Path;

use crate::corpus::{UltrasoundRecording, UtteranceRef};
use crate::dsp::{extract_mel, preprocess_frames, read_mel_bin, resample, write_mel_bin, MelSpectrogram, TARGET_SAMPLE_RATE};
use crate::{AudioClip, CoreError, Result, SAMPLES_PER_LINE, SCANLINES};

/// Values per preprocessed frame.
pub const FRAME_LEN: usize = SCANLINES * SAMPLES_PER_LINE;

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: UtteranceRef,
    pub fps: f64,
    /// `T × 64 × 128` pixels in `[-1, 1]`.
    pub frames: Vec<f32>,
    /// Unnormalized `T × 80` log-mels.
    pub mel: MelSpectrogram,
    /// Reference audio at the analysis sample rate.
    pub audio: AudioClip,
}

impl Utterance {
    pub fn n_frames(&self) -> usize {
        self.mel.frames()
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.frames[t * FRAME_LEN..(t + 1) * FRAME_LEN]
    }
}

/// Resamples the audio to the analysis rate, resizes and normalizes the
/// frames and extracts one mel frame per ultrasound frame.
pub fn preprocess_recording(rec: &UltrasoundRecording) -> Result<Utterance> {
    let audio = resample(rec.audio(), TARGET_SAMPLE_RATE)?;
    let frames = preprocess_frames(rec.frames(), rec.n_frames())?;
    let mel = extract_mel(&audio, rec.fps(), rec.n_frames())?;
    Ok(Utterance { id: rec.utterance_ref(), fps: rec.fps(), frames, mel, audio })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CoreError + '_ {
    move |e| CoreError::io(path, e)
}

/// Stores `<utt>.frames` (little-endian f32 with a `u32` frame count and
/// the fps as `f64`), `<utt>.mel` and `<utt>.wav` under `dir`.
pub fn store_utterance(dir: &Path, utt: &Utterance) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let frames_path = dir.join(format!("{}.frames", utt.id.utterance));
    let mut buf = Vec::with_capacity(12 + utt.frames.len() * 4);
    buf.extend_from_slice(&(utt.n_frames() as u32).to_le_bytes());
    buf.extend_from_slice(&utt.fps.to_le_bytes());
    for v in &utt.frames {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&frames_path, buf).map_err(io_err(&frames_path))?;
    write_mel_bin(&dir.join(format!("{}.mel", utt.id.utterance)), &utt.mel)?;
    utt.audio.write_wav(&dir.join(format!("{}.wav", utt.id.utterance)))
}

pub fn load_utterance(dir: &Path, id: &UtteranceRef) -> Result<Utterance> {
    let frames_path = dir.join(format!("{}.frames", id.utterance));
    let bytes = std::fs::read(&frames_path).map_err(io_err(&frames_path))?;
    if bytes.len() < 12 {
        return Err(CoreError::malformed(&frames_path, "missing header"));
    }
    let n = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let fps = f64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    if bytes.len() != 12 + n * FRAME_LEN * 4 {
        return Err(CoreError::malformed(&frames_path, format!("payload does not hold {n} frames")));
    }
    let frames = bytes[12..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let mel = read_mel_bin(&dir.join(format!("{}.mel", id.utterance)))?;
    if mel.frames() != n {
        return Err(CoreError::Shape(format!("{}: {n} frames but {} mel frames", id.utterance, mel.frames())));
    }
    let audio = AudioClip::read_wav_unscaled(&dir.join(format!("{}.wav", id.utterance)))?;
    Ok(Utterance { id: id.clone(), fps, frames, mel, audio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_synthetic_corpus;

    #[test]
    fn preprocess_shapes_and_round_trip() {
        let rec = &generate_synthetic_corpus(2, 1, (12, 12)).unwrap()[0];
        let utt = preprocess_recording(rec).unwrap();
        assert_eq!(utt.n_frames(), 12);
        assert_eq!(utt.frames.len(), 12 * FRAME_LEN);
        assert!(utt.frames.iter().all(|v| (-1.0..=1.0).contains(v)));
        let dir = tempfile::tempdir().unwrap();
        store_utterance(dir.path(), &utt).unwrap();
        let back = load_utterance(dir.path(), &utt.id).unwrap();
        assert_eq!(back.frames, utt.frames);
        assert_eq!(back.fps, utt.fps);
        assert_eq!(back.audio.len(), utt.audio.len());
        let dev = back.mel.values().iter().zip(utt.mel.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-5);
    }
}
