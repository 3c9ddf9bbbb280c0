use std::io::{Read, Write};
use std::path::Path;

use super::mel::MelSpectrogram;
use crate::{CoreError, Result, N_MELS};

/// First 8 bytes of a mel binary.
pub const MEL_MAGIC: [u8; 8] = *b"UTSMEL\0\x01";
const HEADER_LEN: usize = 16;

/// Writes `magic, u32 T, u32 80` followed by `T × 80` little-endian f32.
pub fn write_mel_bin(path: &Path, mel: &MelSpectrogram) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + mel.values().len() * 4);
    buf.extend_from_slice(&MEL_MAGIC);
    buf.extend_from_slice(&(mel.frames() as u32).to_le_bytes());
    buf.extend_from_slice(&(N_MELS as u32).to_le_bytes());
    for &v in mel.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    file.write_all(&buf).map_err(|e| CoreError::io(path, e))
}

/// Reads a mel binary as unnormalized log-mels.
pub fn read_mel_bin(path: &Path) -> Result<MelSpectrogram> {
    let mut bytes = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| CoreError::io(path, e))?;
    if bytes.len() < HEADER_LEN || bytes[..8] != MEL_MAGIC {
        return Err(CoreError::malformed(path, "missing mel header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (frames, bins) = (word(8), word(12));
    if bins != N_MELS {
        return Err(CoreError::malformed(path, format!("{bins} mel bins, expected {N_MELS}")));
    }
    if bytes.len() != HEADER_LEN + frames * bins * 4 {
        return Err(CoreError::malformed(path, format!("payload size does not match {frames} frames")));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    MelSpectrogram::new(values, frames)
}
