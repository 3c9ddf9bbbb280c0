use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use ultraspeech_core::dsp::{MelAnalyzer, MelSpectrogram, MEL_FLOOR};
use ultraspeech_core::{AudioClip, N_MELS};

use crate::{Result, VocoderError};

pub const DEFAULT_ITERATIONS: usize = 60;
const NNLS_ITERATIONS: usize = 200;

/// Non-zero span of one mel filter.
struct FilterSpan {
    start: usize,
    weights: Vec<f64>,
}

fn filter_spans(filters: &[f64], bins: usize) -> Vec<FilterSpan> {
    filters
        .chunks_exact(bins)
        .map(|row| {
            let start = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let end = row.iter().rposition(|&w| w > 0.0).map_or(start, |e| e + 1);
            FilterSpan { start, weights: row[start..end].to_vec() }
        })
        .collect()
}

/// Non-negative least-squares magnitude spectra whose filterbank
/// projection matches the linear mel energies `mel` (`frames × N_MELS`).
///
/// Starts from each band's energy spread flat over its filter and refines
/// with multiplicative updates, which keep every bin non-negative.
pub fn invert_mel_magnitudes(filters: &[f64], bins: usize, mel: &[f64]) -> Vec<f64> {
    let spans = filter_spans(filters, bins);
    let frames = mel.len() / N_MELS;
    let mut out = vec![0.0; frames * bins];
    let mut proj = [0.0; N_MELS];
    let (mut num, mut den) = (vec![0.0; bins], vec![0.0; bins]);
    for (target, s) in mel.chunks_exact(N_MELS).zip(out.chunks_exact_mut(bins)) {
        num.iter_mut().for_each(|v| *v = 0.0);
        let mut cover = vec![0.0; bins];
        for (span, &m) in spans.iter().zip(target) {
            let area: f64 = span.weights.iter().sum();
            for (k, &w) in span.weights.iter().enumerate() {
                num[span.start + k] += w * m;
                s[span.start + k] += w * m / area;
                cover[span.start + k] += w;
            }
        }
        for (v, c) in s.iter_mut().zip(&cover) {
            if *c > 0.0 {
                *v /= c;
            }
        }
        for _ in 0..NNLS_ITERATIONS {
            for (p, span) in proj.iter_mut().zip(&spans) {
                *p = span.weights.iter().zip(&s[span.start..]).map(|(w, x)| w * x).sum();
            }
            den.iter_mut().for_each(|v| *v = 0.0);
            for (span, &p) in spans.iter().zip(&proj) {
                for (k, &w) in span.weights.iter().enumerate() {
                    den[span.start + k] += w * p;
                }
            }
            for ((x, &n), &d) in s.iter_mut().zip(&num).zip(&den) {
                if d > 0.0 {
                    *x *= n / d;
                }
            }
        }
    }
    out
}

/// Filterbank inversion followed by Griffin-Lim phase reconstruction.
#[derive(Clone, Debug)]
pub struct GriffinLim {
    analyzer: MelAnalyzer,
    iterations: usize,
    seed: u64,
}

impl GriffinLim {
    pub fn new(sample_rate: u32, hop: usize, iterations: usize, seed: u64) -> Self {
        Self { analyzer: MelAnalyzer::new(sample_rate, hop), iterations, seed }
    }

    pub fn hop(&self) -> usize {
        self.analyzer.hop()
    }

    /// Waveform of `mel.frames() · hop` samples.
    pub fn synthesize(&self, mel: &MelSpectrogram) -> Result<AudioClip> {
        if mel.values().iter().any(|v| !v.is_finite()) {
            return Err(VocoderError::Input("non-finite mel value".into()));
        }
        let stft = self.analyzer.stft();
        let (frames, bins) = (mel.frames(), stft.bins());
        // Floor-level bands carry no energy at all.
        let floor = MEL_FLOOR.ln() + 1e-9;
        let linear: Vec<f64> = mel.values().iter().map(|&v| if v <= floor { 0.0 } else { v.exp() }).collect();
        let target = invert_mel_magnitudes(self.analyzer.filters(), bins, &linear);

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut spectra: Vec<Complex64> = target.iter().map(|&m| Complex64::from_polar(m, rng.random_range(0.0..std::f64::consts::TAU))).collect();
        let len = frames * stft.hop();
        for _ in 0..self.iterations {
            let y: Vec<f32> = stft.inverse(&spectra, frames, len).into_iter().map(|v| v as f32).collect();
            let rebuilt = stft.forward(&y, frames);
            for ((x, r), &m) in spectra.iter_mut().zip(&rebuilt).zip(&target) {
                let norm = r.norm();
                if norm > 0.0 {
                    *x = r * (m / norm);
                }
            }
        }
        let y: Vec<f32> = stft.inverse(&spectra, frames, len).into_iter().map(|v| v as f32).collect();
        Ok(AudioClip::limited(y, self.analyzer.sample_rate())?)
    }
}
