use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::recording::UltrasoundRecording;
use crate::dsp::TARGET_SAMPLE_RATE;
use crate::{AudioClip, CoreError, Result, DEFAULT_FPS, RAW_SAMPLES_PER_LINE, SCANLINES};

pub const SYNTHETIC_SPEAKER: &str = "synth01";

/// Scanline ranges whose ridge depth drives each formant.
const BANDS: [(usize, usize); 3] = [(0, 21), (21, 43), (43, 64)];
/// Pixels at or below this level count as background speckle.
const SPECKLE_CEILING: f64 = 64.0;
const SPECKLE_MAX: f64 = 50.0;
const RIDGE_PEAK: f64 = 210.0;
const RIDGE_WIDTH: f64 = 10.0;

/// Resonance `k` sits at `RESONANCE_CENTER[k] + RESONANCE_SLOPE[k] · (depth - 0.5)`
/// where `depth` is that of scanline band `RESONANCE_BAND[k]`. The first
/// three are formants; the fourth is a broad high-frequency resonance that
/// gives the top mel bands a variation of their own.
const RESONANCE_BAND: [usize; 4] = [0, 1, 2, 1];
const RESONANCE_CENTER: [f64; 4] = [550.0, 1500.0, 2800.0, 8000.0];
const RESONANCE_SLOPE: [f64; 4] = [1000.0, 2400.0, 3000.0, 3000.0];
const RESONANCE_AMPLITUDE: [f64; 4] = [0.5, 0.3, 0.2, 0.05];
/// Half-power half-widths, Hz.
const RESONANCE_BANDWIDTH: [f64; 4] = [100.0, 150.0, 300.0, 1500.0];
/// One pitch period per mel hop (271 samples at 81.5 fps), so every
/// analysis window starts at the same glottal phase and leakage between
/// harmonics does not vary from frame to frame.
const F0: f64 = TARGET_SAMPLE_RATE as f64 / 271.0;
const HIGHEST_HARMONIC_HZ: f64 = 10_950.0;
const PEAK_LEVEL: f64 = 0.9;

/// Intensity-weighted mean ridge depth of each band, as a fraction of the
/// scanline length. Speckle below [`SPECKLE_CEILING`] carries no weight.
pub fn band_depths(frame: &[u8]) -> [f64; 3] {
    assert_eq!(frame.len(), SCANLINES * RAW_SAMPLES_PER_LINE, "raw frame size");
    let mut out = [0.5; 3];
    for (k, &(lo, hi)) in BANDS.iter().enumerate() {
        let (mut num, mut den) = (0.0, 0.0);
        for line in frame.chunks_exact(RAW_SAMPLES_PER_LINE).take(hi).skip(lo) {
            for (s, &p) in line.iter().enumerate() {
                let w = (p as f64 - SPECKLE_CEILING).max(0.0);
                num += w * s as f64;
                den += w;
            }
        }
        if den > 0.0 {
            out[k] = num / den / (RAW_SAMPLES_PER_LINE - 1) as f64;
        }
    }
    out
}

/// Resonance frequencies (Hz) voiced during `frame`: three formants and the
/// high resonance.
pub fn synthetic_formants(frame: &[u8]) -> [f64; 4] {
    let d = band_depths(frame);
    std::array::from_fn(|k| RESONANCE_CENTER[k] + RESONANCE_SLOPE[k] * (d[RESONANCE_BAND[k]] - 0.5))
}

/// Slow articulator trajectory in roughly `[-1, 1]`.
struct Trajectory {
    freqs: [f64; 2],
    phases: [f64; 2],
}

impl Trajectory {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let tau = std::f64::consts::TAU;
        Self { freqs: [rng.random_range(0.7..2.5), rng.random_range(2.5..5.0)], phases: [rng.random_range(0.0..tau), rng.random_range(0.0..tau)] }
    }

    fn at(&self, secs: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        0.6 * (tau * self.freqs[0] * secs + self.phases[0]).sin() + 0.4 * (tau * self.freqs[1] * secs + self.phases[1]).sin()
    }
}

fn render_frame(trajectories: &[Trajectory; 3], secs: f64, rng: &mut ChaCha8Rng, out: &mut Vec<u8>) {
    let z: [f64; 3] = std::array::from_fn(|k| trajectories[k].at(secs));
    let centers = BANDS.map(|(lo, hi)| (lo + hi) as f64 / 2.0);
    for line in 0..SCANLINES {
        let l = line as f64;
        let dome = -60.0 * ((l - 31.5) / 31.5).powi(2);
        let bend: f64 = (0..3).map(|k| z[k] * (-((l - centers[k]) / 9.0).powi(2)).exp()).sum();
        let depth = (421.0 + dome + 220.0 * bend).clamp(60.0, 780.0);
        for s in 0..RAW_SAMPLES_PER_LINE {
            let ridge = RIDGE_PEAK * (-((s as f64 - depth) / RIDGE_WIDTH).powi(2)).exp();
            let speckle = rng.random_range(0.0..SPECKLE_MAX);
            out.push((ridge + speckle).round().clamp(0.0, 255.0) as u8);
        }
    }
}

/// Amplitude of a harmonic at `hz` under the resonances at `formants`.
fn spectral_envelope(hz: f64, resonances: &[f64; 4]) -> f64 {
    (0..4).map(|k| RESONANCE_AMPLITUDE[k] / (1.0 + ((hz - resonances[k]) / RESONANCE_BANDWIDTH[k]).powi(2))).sum()
}

fn render_audio(frames: &[u8], n_frames: usize, fps: f64) -> Result<AudioClip> {
    let rate = TARGET_SAMPLE_RATE as f64;
    let n_samples = (n_frames as f64 * rate / fps).round() as usize;
    let n_harmonics = (HIGHEST_HARMONIC_HZ / F0) as usize;
    // Zero-phase cosines whose amplitudes sum to PEAK_LEVEL all peak
    // together once per period, so the waveform peak is the same for every
    // utterance and peak normalization on load is a fixed gain.
    let envelopes: Vec<Vec<f64>> = frames
        .chunks_exact(SCANLINES * RAW_SAMPLES_PER_LINE)
        .map(|f| {
            let formants = synthetic_formants(f);
            let env: Vec<f64> = (1..=n_harmonics).map(|h| spectral_envelope(h as f64 * F0, &formants)).collect();
            let total: f64 = env.iter().sum();
            env.into_iter().map(|a| a * PEAK_LEVEL / total).collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        // Amplitudes glide linearly between frame times; stepping them
        // would splatter energy into the weak upper bands.
        let pos = n as f64 * fps / rate;
        let t = (pos as usize).min(n_frames - 1);
        let next = (t + 1).min(n_frames - 1);
        let frac = (pos - t as f64).min(1.0);
        let theta = std::f64::consts::TAU * F0 * n as f64 / rate;
        let x: f64 = (0..n_harmonics)
            .map(|h| {
                let a = envelopes[t][h] + frac * (envelopes[next][h] - envelopes[t][h]);
                a * ((h + 1) as f64 * theta).cos()
            })
            .sum();
        samples.push(x as f32);
    }
    AudioClip::limited(samples, TARGET_SAMPLE_RATE)
}

/// Reproducible stand-in corpus for a single speaker.
///
/// Each frame shows a bright, smoothly moving tongue-like ridge over dark
/// speckle. The paired audio is a pulse-like harmonic voice at about
/// 81 Hz shaped by resonances whose frequencies follow the ridge depth in
/// three scanline bands (see [`synthetic_formants`]). Loudness,
/// peak level and glottal phase per mel frame are fixed, so every mel band
/// is a deterministic, learnable function of the articulation. Utterance ids are `001_xaud`,
/// `002_xaud`, ... and each recording's content depends only on `seed` and
/// its index.
pub fn generate_synthetic_corpus(seed: u64, n_utterances: usize, frame_count_range: (usize, usize)) -> Result<Vec<UltrasoundRecording>> {
    let (min, max) = frame_count_range;
    if n_utterances == 0 || min == 0 || min > max {
        return Err(CoreError::Precondition(format!("need n >= 1 and 1 <= min <= max, got n={n_utterances}, range=({min}, {max})")));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (1..=n_utterances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.random());
            let n_frames = rng.random_range(min..=max);
            let trajectories = [Trajectory::sample(&mut rng), Trajectory::sample(&mut rng), Trajectory::sample(&mut rng)];
            let mut frames = Vec::with_capacity(n_frames * SCANLINES * RAW_SAMPLES_PER_LINE);
            for t in 0..n_frames {
                render_frame(&trajectories, t as f64 / DEFAULT_FPS, &mut rng, &mut frames);
            }
            let audio = render_audio(&frames, n_frames, DEFAULT_FPS)?;
            UltrasoundRecording::new(SYNTHETIC_SPEAKER, format!("{i:03}_xaud"), frames, DEFAULT_FPS, audio)
        })
        .collect()
}
