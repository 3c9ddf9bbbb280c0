use crate::{ModelError, Result};

/// Beam lines of consecutive frames laid end to end: `(partition · T)`
/// steps of `width` samples, where each run of `partition` steps is one
/// frame.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamlineSequence {
    steps: Vec<f32>,
    partition: usize,
    width: usize,
}

impl BeamlineSequence {
    pub fn n_steps(&self) -> usize {
        self.steps.len() / self.width
    }

    pub fn partition_length(&self) -> usize {
        self.partition
    }

    pub fn n_partitions(&self) -> usize {
        self.n_steps() / self.partition
    }

    pub fn step(&self, i: usize) -> &[f32] {
        &self.steps[i * self.width..(i + 1) * self.width]
    }

    /// Steps `i · partition .. (i + 1) · partition`, i.e. frame `i`.
    pub fn partition(&self, i: usize) -> &[f32] {
        let n = self.partition * self.width;
        &self.steps[i * n..(i + 1) * n]
    }
}

/// Concatenates the scanlines of `frames` (`T × scanlines × width`) in frame
/// order, then scanline order.
pub fn frames_to_sequence(frames: &[f32], scanlines: usize, width: usize) -> Result<BeamlineSequence> {
    if scanlines == 0 || width == 0 || frames.is_empty() || frames.len() % (scanlines * width) != 0 {
        return Err(ModelError::Shape(format!("{} values is not a whole number of {scanlines}x{width} frames", frames.len())));
    }
    Ok(BeamlineSequence { steps: frames.to_vec(), partition: scanlines, width })
}

pub fn sequence_to_frames(seq: &BeamlineSequence) -> Vec<f32> {
    seq.steps.clone()
}
