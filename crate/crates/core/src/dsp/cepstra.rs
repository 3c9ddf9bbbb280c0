use super::mel::{hop_for_fps, MelAnalyzer};
use crate::{AudioClip, CoreError, Result, DEFAULT_FPS, N_MELS};

/// Coefficients `c0 ..= c12` per frame.
pub const N_CEPSTRA: usize = 13;
/// Coefficients `c1 ..= c12` enter the distortion; `c0` (energy) does not.
pub const MCD_COEFFS: usize = 12;

/// Orthonormal DCT-II, keeping the first `n_out` coefficients.
pub fn dct2_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                .sum();
            s * if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() }
        })
        .collect()
}

/// `T × 13` mel-cepstral matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Cepstra {
    frames: usize,
    values: Vec<f64>,
}

impl Cepstra {
    pub fn new(values: Vec<f64>, frames: usize) -> Result<Self> {
        if values.len() != frames * N_CEPSTRA {
            return Err(CoreError::Shape(format!("{} values for {frames} cepstral frames", values.len())));
        }
        Ok(Self { frames, values })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * N_CEPSTRA..(t + 1) * N_CEPSTRA]
    }
}

/// Mel cepstra with the analysis framing used for the given frame rate.
pub fn mel_cepstra_at(audio: &AudioClip, fps: f64) -> Result<Cepstra> {
    let hop = hop_for_fps(audio.sample_rate(), fps)?;
    if audio.is_empty() {
        return Err(CoreError::InsufficientAudio("empty clip".into()));
    }
    let frames = (audio.len() / hop).max(1);
    let analyzer = MelAnalyzer::new(audio.sample_rate(), hop);
    let log_mel = analyzer.log_mel(audio.samples(), frames);
    let mut values = Vec::with_capacity(frames * N_CEPSTRA);
    for row in log_mel.chunks_exact(N_MELS) {
        values.extend(dct2_ortho(row, N_CEPSTRA));
    }
    Cepstra::new(values, frames)
}

/// Mel cepstra framed at the nominal ultrasound frame rate.
pub fn mel_cepstra(audio: &AudioClip) -> Result<Cepstra> {
    mel_cepstra_at(audio, DEFAULT_FPS)
}

/// Frame-averaged `(10 / ln 10) · sqrt(2 · Σ_{d=1..12} Δc_d²)` with
/// positional pairing over the shorter sequence.
pub fn mcd_from_cepstra(reference: &Cepstra, synthesized: &Cepstra) -> Result<f64> {
    let frames = reference.frames().min(synthesized.frames());
    if frames == 0 {
        return Err(CoreError::InsufficientAudio("no cepstral frames to compare".into()));
    }
    let k = 10.0 / std::f64::consts::LN_10;
    let total: f64 = (0..frames)
        .map(|t| {
            let (r, s) = (reference.row(t), synthesized.row(t));
            let sq: f64 = (1..=MCD_COEFFS).map(|d| (r[d] - s[d]).powi(2)).sum();
            k * (2.0 * sq).sqrt()
        })
        .sum();
    Ok(total / frames as f64)
}

/// Mel-cepstral distortion in dB between two clips at the same sample rate.
pub fn mcd(reference: &AudioClip, synthesized: &AudioClip) -> Result<f64> {
    if reference.sample_rate() != synthesized.sample_rate() {
        return Err(CoreError::IncompatibleInput(format!(
            "sample rates differ: {} vs {}",
            reference.sample_rate(),
            synthesized.sample_rate()
        )));
    }
    mcd_from_cepstra(&mel_cepstra(reference)?, &mel_cepstra(synthesized)?)
}
