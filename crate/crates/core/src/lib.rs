//! Data types, signal processing and corpus handling shared by every stage
//! of the ultrasound-to-speech pipeline.

mod audio;
pub mod corpus;
pub mod dsp;
mod error;
pub mod features;

pub use audio::AudioClip;
pub use error::{CoreError, Result};

/// Scanlines per ultrasound frame.
pub const SCANLINES: usize = 64;
/// Echo samples per scanline in the raw recordings.
pub const RAW_SAMPLES_PER_LINE: usize = 842;
/// Echo samples per scanline after resizing.
pub const SAMPLES_PER_LINE: usize = 128;
/// Mel bins predicted per ultrasound frame.
pub const N_MELS: usize = 80;
/// Nominal ultrasound frame rate of the TaL80 recordings.
pub const DEFAULT_FPS: f64 = 81.5;
