use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{AudioClip, CoreError, Result};

/// Adds zero-mean Gaussian noise with standard deviation `level` and clips
/// the result to `[-1, 1]`.
pub fn add_white_noise_anchor(audio: &AudioClip, level: f64, seed: u64) -> Result<AudioClip> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(CoreError::Precondition(format!("noise level must be non-negative, got {level}")));
    }
    if level == 0.0 {
        return Ok(audio.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, level).expect("positive finite std");
    let samples = audio.samples().iter().map(|&s| (s as f64 + dist.sample(&mut rng)).clamp(-1.0, 1.0) as f32).collect();
    AudioClip::new(samples, audio.sample_rate())
}
