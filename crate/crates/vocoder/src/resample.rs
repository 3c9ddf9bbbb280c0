use ultraspeech_core::dsp::MelSpectrogram;
use ultraspeech_core::N_MELS;

use crate::{Result, VocoderError};

/// Re-times a log-mel from the ultrasound frame rate to a vocoder hop by
/// linear interpolation along time.
///
/// Frame `j` of the output sits at `j · target_hop` samples, i.e. at
/// fractional source frame `j · target_hop / (sample_rate / fps)`; the
/// output has `round(T · (sample_rate / fps) / target_hop)` frames so the
/// duration is kept to within one hop.
pub fn resample_mel_for_vocoder(mel: &MelSpectrogram, fps: f64, target_hop: usize, sample_rate: u32) -> Result<MelSpectrogram> {
    if !(fps.is_finite() && fps > 0.0) || target_hop == 0 || sample_rate == 0 {
        return Err(VocoderError::Input(format!("fps {fps}, hop {target_hop}, rate {sample_rate}")));
    }
    let t = mel.frames();
    let source_hop = sample_rate as f64 / fps;
    let ratio = target_hop as f64 / source_hop;
    let out_frames = ((t as f64 / ratio).round() as usize).max(1);
    let mut values = Vec::with_capacity(out_frames * N_MELS);
    for j in 0..out_frames {
        let pos = (j as f64 * ratio).min((t - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(t - 1);
        let frac = pos - lo as f64;
        let (a, b) = (mel.row(lo), mel.row(hi));
        values.extend(a.iter().zip(b).map(|(x, y)| x + frac * (y - x)));
    }
    let out = MelSpectrogram::new(values, out_frames)?;
    match mel.stats() {
        Some(stats) => Ok(MelSpectrogram::new_standardized(out.into_values(), out_frames, stats.clone())?),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(frames: usize) -> MelSpectrogram {
        MelSpectrogram::new((0..frames * N_MELS).map(|i| (i / N_MELS) as f64 + (i % N_MELS) as f64 * 0.01).collect(), frames).unwrap()
    }

    #[test]
    fn ten_frames_become_eleven_at_hop_256() {
        let out = resample_mel_for_vocoder(&ramp(10), 81.5, 256, 22050).unwrap();
        assert_eq!(out.frames(), 11);
    }

    #[test]
    fn matching_hop_is_identity() {
        let mel = ramp(7);
        let out = resample_mel_for_vocoder(&mel, 22050.0 / 300.0, 300, 22050).unwrap();
        assert_eq!(out, mel);
    }

    #[test]
    fn interpolates_linearly_between_frames() {
        // Source hop 200, target hop 100: every other output frame is a midpoint.
        let mel = ramp(4);
        let out = resample_mel_for_vocoder(&mel, 22050.0 / 200.0, 100, 22050).unwrap();
        assert_eq!(out.frames(), 8);
        for b in 0..N_MELS {
            assert!((out.row(3)[b] - 0.5 * (mel.row(1)[b] + mel.row(2)[b])).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn constant_mel_stays_constant(frames in 1usize..60, level in -11.0f64..2.0, hop in 64usize..512) {
            let mel = MelSpectrogram::new(vec![level; frames * N_MELS], frames).unwrap();
            let out = resample_mel_for_vocoder(&mel, 81.5, hop, 22050).unwrap();
            prop_assert!(out.values().iter().all(|&v| (v - level).abs() < 1e-12));
            let source_hop = 22050.0 / 81.5;
            let duration = frames as f64 * source_hop;
            prop_assert!((out.frames() as f64 * hop as f64 - duration).abs() <= hop as f64);
        }
    }
}
