use std::path::Path;

use crate::{CoreError, Result};

/// Mono waveform with samples on the `[-1, 1]` scale.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    /// Wraps samples that are already within `[-1, 1]`.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(CoreError::Precondition("sample rate must be positive".into()));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(CoreError::NumericInput(format!("audio sample {bad} outside [-1, 1]")));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Scales arbitrary finite samples so the peak magnitude is exactly 1.
    /// Digital silence is kept as is.
    pub fn peak_normalized(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(CoreError::NumericInput("non-finite audio sample".into()));
        }
        let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        if peak > 0.0 {
            for s in &mut samples {
                *s = (*s / peak).clamp(-1.0, 1.0);
            }
        }
        Self::new(samples, sample_rate)
    }

    /// Scales down only when the peak exceeds 1, leaving quieter signals untouched.
    pub fn limited(mut samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(CoreError::NumericInput("non-finite audio sample".into()));
        }
        let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
        if peak > 1.0 {
            for s in &mut samples {
                *s = (*s / peak).clamp(-1.0, 1.0);
            }
        }
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self { samples: self.samples[..len.min(self.samples.len())].to_vec(), sample_rate: self.sample_rate }
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Reads any integer or float PCM WAV, mixing channels down to mono.
    /// Samples are returned unnormalized on the `[-1, 1]` scale of the
    /// container's bit depth.
    pub fn read_wav_raw(path: &Path) -> Result<(Vec<f32>, u32)> {
        let wav_err = |source| CoreError::Wav { path: path.to_path_buf(), source };
        let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
        let spec = reader.spec();
        let channels = spec.channels.max(1) as usize;
        let interleaved: Vec<f32> = match spec.sample_format {
            hound::SampleFormat::Float => reader.samples::<f32>().collect::<std::result::Result<_, _>>().map_err(wav_err)?,
            hound::SampleFormat::Int => {
                let scale = 2f32.powi(spec.bits_per_sample as i32 - 1);
                reader
                    .samples::<i32>()
                    .map(|s| s.map(|v| v as f32 / scale))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(wav_err)?
            }
        };
        let mono = interleaved.chunks(channels).map(|c| c.iter().sum::<f32>() / channels as f32).collect();
        Ok((mono, spec.sample_rate))
    }

    /// Reads a WAV file and peak-normalizes it.
    pub fn read_wav(path: &Path) -> Result<Self> {
        let (samples, rate) = Self::read_wav_raw(path)?;
        Self::peak_normalized(samples, rate)
    }

    /// Reads a WAV file, keeping its level.
    pub fn read_wav_unscaled(path: &Path) -> Result<Self> {
        let (samples, rate) = Self::read_wav_raw(path)?;
        Self::limited(samples, rate)
    }

    /// Writes 16-bit linear PCM.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let wav_err = |source| CoreError::Wav { path: path.to_path_buf(), source };
        let spec = hound::WavSpec { channels: 1, sample_rate: self.sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
        for &s in &self.samples {
            writer.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16).map_err(wav_err)?;
        }
        writer.finalize().map_err(wav_err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(AudioClip::new(vec![0.5, 1.5], 8000).is_err());
        assert!(AudioClip::new(vec![f32::NAN], 8000).is_err());
        assert!(AudioClip::new(vec![0.1], 0).is_err());
    }

    #[test]
    fn peak_normalization_hits_unit_peak() {
        let clip = AudioClip::peak_normalized(vec![0.0, -4.0, 2.0], 8000).unwrap();
        assert_eq!(clip.samples(), &[0.0, -1.0, 0.5]);
        let silent = AudioClip::peak_normalized(vec![0.0; 4], 8000).unwrap();
        assert_eq!(silent.samples(), &[0.0; 4]);
    }

    #[test]
    fn limiter_leaves_quiet_audio_alone() {
        let quiet = AudioClip::limited(vec![0.25, -0.5], 8000).unwrap();
        assert_eq!(quiet.samples(), &[0.25, -0.5]);
        let loud = AudioClip::limited(vec![2.0, -1.0], 8000).unwrap();
        assert_eq!(loud.samples(), &[1.0, -0.5]);
    }

    #[test]
    fn wav_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let clip = AudioClip::new((0..100).map(|i| (i as f32 / 50.0) - 1.0).collect(), 22050).unwrap();
        clip.write_wav(&path).unwrap();
        let back = AudioClip::read_wav_unscaled(&path).unwrap();
        assert_eq!(back.sample_rate(), 22050);
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }
}
