use crate::{AudioClip, CoreError, Result};

/// Zero crossings of the sinc kernel kept on each side.
const HALF_ZEROS: f64 = 16.0;

/// Band-limited resampling with a Hann-windowed sinc kernel.
pub fn resample(audio: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(CoreError::Precondition("target sample rate must be positive".into()));
    }
    let src_rate = audio.sample_rate();
    if src_rate == target_rate {
        return Ok(audio.clone());
    }
    let ratio = target_rate as f64 / src_rate as f64;
    let cutoff = ratio.min(1.0);
    let half_width = HALF_ZEROS / cutoff;
    let x = audio.samples();
    let out_len = (x.len() as f64 * ratio).round() as usize;
    let out: Vec<f32> = (0..out_len)
        .map(|j| {
            let center = j as f64 / ratio;
            let lo = (center - half_width).ceil().max(0.0) as usize;
            let hi = ((center + half_width).floor() as usize).min(x.len().saturating_sub(1));
            let mut acc = 0.0;
            for (i, &s) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let t = i as f64 - center;
                let arg = t * cutoff;
                let sinc = if arg == 0.0 { 1.0 } else { (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg) };
                let window = 0.5 + 0.5 * (std::f64::consts::PI * t / half_width).cos();
                acc += s as f64 * cutoff * sinc * window;
            }
            acc as f32
        })
        .collect();
    AudioClip::limited(out, target_rate)
}
