use std::path::Path;

use image::{Rgb, RgbImage};

use super::mel::MelSpectrogram;
use crate::{CoreError, Result, N_MELS};

const CELL: u32 = 3;

/// Dark-to-bright palette stops.
const PALETTE: [[f64; 3]; 5] = [
    [0.0, 0.0, 4.0],
    [81.0, 18.0, 124.0],
    [183.0, 55.0, 121.0],
    [252.0, 137.0, 97.0],
    [252.0, 253.0, 191.0],
];

fn colour(t: f64) -> Rgb<u8> {
    let x = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (x.floor() as usize).min(PALETTE.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (PALETTE[i][k] * (1.0 - f) + PALETTE[i + 1][k] * f).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Renders the mel matrix as a PNG with time running left to right and the
/// lowest band at the bottom, scaled to the matrix's own value range.
pub fn write_mel_png(path: &Path, mel: &MelSpectrogram) -> Result<()> {
    if mel.frames() == 0 {
        return Err(CoreError::Shape("cannot plot an empty mel".into()));
    }
    let (lo, hi) = mel.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-12);
    let mut img = RgbImage::new(mel.frames() as u32 * CELL, N_MELS as u32 * CELL);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let t = (x / CELL) as usize;
        let bin = N_MELS - 1 - (y / CELL) as usize;
        *px = colour((mel.row(t)[bin] - lo) / span);
    }
    img.save(path).map_err(|source| CoreError::Image { path: path.to_path_buf(), source })
}
