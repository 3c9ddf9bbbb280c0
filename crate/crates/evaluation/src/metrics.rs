use ultraspeech_core::dsp::{mcd, MelSpectrogram};
use ultraspeech_core::AudioClip;

use crate::{EvalError, Result};

/// Mean over all `T × 80` entries of the squared difference of two
/// standardized log-mels.
pub fn sentence_mse(pred: &MelSpectrogram, reference: &MelSpectrogram) -> Result<f64> {
    if pred.frames() != reference.frames() {
        return Err(EvalError::IncompatibleInput(format!("{} predicted frames vs {} reference frames", pred.frames(), reference.frames())));
    }
    if !(pred.is_normalized() && reference.is_normalized()) {
        return Err(EvalError::Precondition("sentence MSE is defined on standardized mels".into()));
    }
    let n = pred.values().len();
    if n == 0 {
        return Err(EvalError::Precondition("empty mel".into()));
    }
    Ok(pred.values().iter().zip(reference.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64)
}

/// Mel-cepstral distortion (dB) of a synthesized sentence against its
/// reference recording.
pub fn sentence_mcd(reference: &AudioClip, synthesized: &AudioClip) -> Result<f64> {
    Ok(mcd(reference, synthesized)?)
}
