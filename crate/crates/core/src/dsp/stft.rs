use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// Index into a signal of length `len` extended by mirror reflection
/// about its first and last samples.
fn reflect(idx: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let i = idx.rem_euclid(period);
    if i < len as isize {
        i as usize
    } else {
        (period - i) as usize
    }
}

/// Short-time Fourier transform with centered frames: frame `i` covers
/// samples `i·hop - n_fft/2 .. i·hop + n_fft/2` of the signal extended by
/// reflection at both ends.
#[derive(Clone)]
pub struct Stft {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("n_fft", &self.n_fft).field("hop", &self.hop).finish()
    }
}

impl Stft {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        assert!(n_fft >= 2 && hop >= 1, "invalid STFT geometry");
        let mut planner = FftPlanner::new();
        Self {
            n_fft,
            hop,
            window: hann_window(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// One-sided bins per frame.
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frames needed to cover `len` samples with centered framing.
    pub fn frames_for(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    /// One-sided spectra, `n_frames × bins`, row-major.
    pub fn forward(&self, samples: &[f32], n_frames: usize) -> Vec<Complex64> {
        let half = self.n_fft / 2;
        let bins = self.bins();
        let mut out = Vec::with_capacity(n_frames * bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        for i in 0..n_frames {
            let start = (i * self.hop) as isize - half as isize;
            for (k, b) in buf.iter_mut().enumerate() {
                let idx = start + k as isize;
                let x = if samples.is_empty() { 0.0 } else { samples[reflect(idx, samples.len())] as f64 };
                *b = Complex64::new(x * self.window[k], 0.0);
            }
            self.forward.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        out
    }

    pub fn magnitudes(&self, samples: &[f32], n_frames: usize) -> Vec<f64> {
        self.forward(samples, n_frames).iter().map(|c| c.norm()).collect()
    }

    /// Weighted overlap-add inverse of [`Stft::forward`], producing
    /// `out_len` samples.
    pub fn inverse(&self, spectra: &[Complex64], n_frames: usize, out_len: usize) -> Vec<f64> {
        let half = self.n_fft / 2;
        let bins = self.bins();
        assert_eq!(spectra.len(), n_frames * bins, "spectrum size");
        let mut acc = vec![0.0; out_len];
        let mut norm = vec![0.0; out_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        let scale = 1.0 / self.n_fft as f64;
        for i in 0..n_frames {
            let frame = &spectra[i * bins..(i + 1) * bins];
            buf[..bins].copy_from_slice(frame);
            for k in bins..self.n_fft {
                buf[k] = frame[self.n_fft - k].conj();
            }
            self.inverse.process(&mut buf);
            let start = (i * self.hop) as isize - half as isize;
            for (k, b) in buf.iter().enumerate() {
                let idx = start + k as isize;
                if idx >= 0 && (idx as usize) < out_len {
                    let w = self.window[k];
                    acc[idx as usize] += b.re * scale * w;
                    norm[idx as usize] += w * w;
                }
            }
        }
        for (a, n) in acc.iter_mut().zip(&norm) {
            if *n > 1e-8 {
                *a /= n;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_mirrors_about_end_samples() {
        let idx: Vec<usize> = (-4..9).map(|i| reflect(i, 5)).collect();
        assert_eq!(idx, vec![4, 3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1, 0]);
        assert_eq!(reflect(-3, 1), 0);
    }

    #[test]
    fn edge_frames_keep_full_energy() {
        let stft = Stft::new(64, 16);
        let x = vec![0.5f32; 400];
        let mags = stft.magnitudes(&x, stft.frames_for(x.len()));
        let bins = stft.bins();
        assert!((mags[0] - mags[10 * bins]).abs() < 1e-9);
    }

    #[test]
    fn window_is_periodic() {
        let w = hann_window(8);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-15);
        assert!((w[1] - w[7]).abs() < 1e-15);
    }

    #[test]
    fn inverse_reconstructs_signal() {
        let stft = Stft::new(64, 16);
        let x: Vec<f32> = (0..500).map(|i| ((i as f32) * 0.37).sin() * 0.5).collect();
        let n = stft.frames_for(x.len());
        let spec = stft.forward(&x, n);
        let y = stft.inverse(&spec, n, x.len());
        for (a, b) in x.iter().zip(&y) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }

    #[test]
    fn dc_signal_lands_in_bin_zero() {
        let stft = Stft::new(32, 8);
        let mags = stft.magnitudes(&[1.0; 200], 10);
        let frame = &mags[5 * 17..6 * 17];
        // The Hann window sums to n/2.
        assert!((frame[0] - 16.0).abs() < 1e-9);
        assert!((frame[1] - 8.0).abs() < 1e-9);
        assert!(frame[2..].iter().all(|v| v.abs() < 1e-9));
    }
}
