use serde::{Deserialize, Serialize};

use super::stft::Stft;
use crate::{AudioClip, CoreError, Result, N_MELS};

pub const N_FFT: usize = 1024;
pub const TARGET_SAMPLE_RATE: u32 = 22050;
/// Mel magnitudes are clamped to this before the natural log.
pub const MEL_FLOOR: f64 = 1e-5;
/// Lower bound on per-bin standard deviations estimated from data, so
/// bins that never leave the floor do not make the statistics degenerate.
pub const STD_FLOOR: f64 = 1e-3;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * ((mel - MIN_LOG_MEL) * log_step()).exp()
    }
}

/// Edge frequencies of `n_mels` triangular filters spanning 0 Hz to Nyquist.
fn filter_edges(sample_rate: u32, n_mels: usize) -> Vec<f64> {
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    (0..n_mels + 2).map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64)).collect()
}

/// Center frequency of each mel filter in Hz.
pub fn mel_center_frequencies(sample_rate: u32, n_mels: usize) -> Vec<f64> {
    filter_edges(sample_rate, n_mels)[1..=n_mels].to_vec()
}

/// Area-normalized triangular filterbank, `n_mels × (n_fft/2 + 1)`.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Vec<f64> {
    let bins = n_fft / 2 + 1;
    let edges = filter_edges(sample_rate, n_mels);
    let mut fb = vec![0.0; n_mels * bins];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (hi - lo);
        for k in 0..bins {
            let f = k as f64 * sample_rate as f64 / n_fft as f64;
            let w = ((f - lo) / (center - lo)).min((hi - f) / (hi - center)).max(0.0);
            fb[m * bins + k] = w * norm;
        }
    }
    fb
}

/// Round-to-nearest hop that yields one analysis frame per ultrasound frame.
pub fn hop_for_fps(sample_rate: u32, fps: f64) -> Result<usize> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(CoreError::Precondition(format!("frame rate must be positive, got {fps}")));
    }
    let hop = (sample_rate as f64 / fps).round() as usize;
    if hop == 0 {
        return Err(CoreError::Precondition(format!("frame rate {fps} exceeds the sample rate")));
    }
    Ok(hop)
}

/// Log-mel front end: Hann-windowed 1024-point STFT magnitudes, an 80-band
/// filterbank and a floored natural log.
#[derive(Clone, Debug)]
pub struct MelAnalyzer {
    sample_rate: u32,
    stft: Stft,
    filters: Vec<f64>,
}

impl MelAnalyzer {
    pub fn new(sample_rate: u32, hop: usize) -> Self {
        Self { sample_rate, stft: Stft::new(N_FFT, hop), filters: mel_filterbank(sample_rate, N_FFT, N_MELS) }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn hop(&self) -> usize {
        self.stft.hop()
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    /// `N_MELS × bins` filter matrix.
    pub fn filters(&self) -> &[f64] {
        &self.filters
    }

    /// Linear-amplitude mel energies from `n_frames × bins` magnitudes.
    pub fn mel_from_magnitudes(&self, mags: &[f64], n_frames: usize) -> Vec<f64> {
        let bins = self.stft.bins();
        let mut out = vec![0.0; n_frames * N_MELS];
        for (frame, row) in mags.chunks_exact(bins).zip(out.chunks_exact_mut(N_MELS)) {
            for (m, o) in row.iter_mut().enumerate() {
                *o = self.filters[m * bins..(m + 1) * bins].iter().zip(frame).map(|(w, x)| w * x).sum();
            }
        }
        out
    }

    /// Floored natural-log mel matrix, `n_frames × N_MELS`.
    pub fn log_mel(&self, samples: &[f32], n_frames: usize) -> Vec<f64> {
        let mags = self.stft.magnitudes(samples, n_frames);
        self.mel_from_magnitudes(&mags, n_frames).into_iter().map(|v| v.max(MEL_FLOOR).ln()).collect()
    }
}

/// Exactly `n_frames` log-mel frames with hop `round(sample_rate / fps)`.
pub fn extract_mel(audio: &AudioClip, fps: f64, n_frames: usize) -> Result<MelSpectrogram> {
    let hop = hop_for_fps(audio.sample_rate(), fps)?;
    if audio.len() < hop {
        return Err(CoreError::InsufficientAudio(format!("{} samples is shorter than one hop of {hop}", audio.len())));
    }
    let analyzer = MelAnalyzer::new(audio.sample_rate(), hop);
    MelSpectrogram::new(analyzer.log_mel(audio.samples(), n_frames), n_frames)
}

/// Per-bin mean and standard deviation of a speaker's training mels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl MelStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let stats = Self { mean, std };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != N_MELS || self.std.len() != N_MELS {
            return Err(CoreError::Shape(format!("stats need {N_MELS} bins, got {}/{}", self.mean.len(), self.std.len())));
        }
        if let Some(bin) = self.std.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(CoreError::DegenerateStats(format!("std of bin {bin} is {}", self.std[bin])));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(CoreError::DegenerateStats("non-finite mean".into()));
        }
        Ok(())
    }

    /// Population statistics over every frame of `mels`, with standard
    /// deviations floored at [`STD_FLOOR`].
    pub fn from_mels<'a>(mels: impl IntoIterator<Item = &'a MelSpectrogram>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum = [0.0f64; N_MELS];
        let mut sq = [0.0f64; N_MELS];
        for mel in mels {
            if mel.is_normalized() {
                return Err(CoreError::Precondition("statistics must come from unnormalized mels".into()));
            }
            for row in mel.values().chunks_exact(N_MELS) {
                count += 1;
                for (b, &v) in row.iter().enumerate() {
                    sum[b] += v;
                    sq[b] += v * v;
                }
            }
        }
        if count == 0 {
            return Err(CoreError::InsufficientData("no mel frames for statistics".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq.iter().zip(&mean).map(|(q, m)| (q / n - m * m).max(0.0).sqrt().max(STD_FLOOR)).collect();
        Self::new(mean, std)
    }
}

/// `T × 80` log-mel matrix. When `stats` is present the values are
/// standardized with those statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    frames: usize,
    values: Vec<f64>,
    stats: Option<MelStats>,
}

impl MelSpectrogram {
    /// Unnormalized log-mels, row-major `frames × N_MELS`.
    pub fn new(values: Vec<f64>, frames: usize) -> Result<Self> {
        if values.len() != frames * N_MELS {
            return Err(CoreError::Shape(format!("{} values for {frames} frames of {N_MELS} bins", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NumericInput("non-finite mel value".into()));
        }
        Ok(Self { frames, values, stats: None })
    }

    /// Values already standardized with `stats`.
    pub fn new_standardized(values: Vec<f64>, frames: usize, stats: MelStats) -> Result<Self> {
        stats.validate()?;
        let mut mel = Self::new(values, frames)?;
        mel.stats = Some(stats);
        Ok(mel)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * N_MELS..(t + 1) * N_MELS]
    }

    pub fn is_normalized(&self) -> bool {
        self.stats.is_some()
    }

    pub fn stats(&self) -> Option<&MelStats> {
        self.stats.as_ref()
    }

    /// `(x - mean) / std` per bin.
    pub fn standardize(&self, stats: &MelStats) -> Result<Self> {
        if self.is_normalized() {
            return Err(CoreError::Precondition("mel is already standardized".into()));
        }
        stats.validate()?;
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(N_MELS) {
            for (b, v) in row.iter_mut().enumerate() {
                *v = (*v - stats.mean[b]) / stats.std[b];
            }
        }
        Ok(Self { frames: self.frames, values, stats: Some(stats.clone()) })
    }

    /// Inverse of [`MelSpectrogram::standardize`] using the attached statistics.
    pub fn destandardize(&self) -> Result<Self> {
        let stats = self.stats.as_ref().ok_or_else(|| CoreError::Precondition("mel is not standardized".into()))?;
        let mut values = self.values.clone();
        for row in values.chunks_exact_mut(N_MELS) {
            for (b, v) in row.iter_mut().enumerate() {
                *v = *v * stats.std[b] + stats.mean[b];
            }
        }
        Ok(Self { frames: self.frames, values, stats: None })
    }
}
