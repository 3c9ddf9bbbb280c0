//! Signal processing: ultrasound frame preprocessing, mel analysis aligned
//! to the ultrasound frame rate, mel cepstra and distortion, and stimulus
//! helpers.

mod cepstra;
mod image;
mod mel;
mod melio;
mod noise;
mod plot;
mod resample;
mod stft;

pub use cepstra::{dct2_ortho, mcd, mcd_from_cepstra, mel_cepstra, mel_cepstra_at, Cepstra, MCD_COEFFS, N_CEPSTRA};
pub use image::{normalize_pixel, normalize_pixels, preprocess_frames, resize_bicubic, PIXEL_SCALE};
pub use mel::{
    extract_mel, hop_for_fps, hz_to_mel, mel_center_frequencies, mel_filterbank, mel_to_hz, MelAnalyzer, MelSpectrogram, MelStats, MEL_FLOOR,
    N_FFT, STD_FLOOR, TARGET_SAMPLE_RATE,
};
pub use melio::{read_mel_bin, write_mel_bin, MEL_MAGIC};
pub use noise::add_white_noise_anchor;
pub use plot::write_mel_png;
pub use resample::resample;
pub use stft::{hann_window, Stft};
