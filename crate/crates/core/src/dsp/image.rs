use crate::{CoreError, Result, RAW_SAMPLES_PER_LINE, SAMPLES_PER_LINE, SCANLINES};

/// Catmull-Rom member of the cubic convolution family.
const CUBIC_A: f64 = -0.5;

/// `x / PIXEL_SCALE - 1` maps `[0, 255]` onto `[-1, 1]`.
pub const PIXEL_SCALE: f64 = 127.5;

fn cubic_weight(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Bicubic resampling of a row-major `rows × cols` matrix to
/// `rows × out_cols`, along the column (echo sample) axis only.
///
/// Output column `j` samples the input at `(j + 0.5) · cols / out_cols - 0.5`
/// with neighbours clamped to the edge.
pub fn resize_bicubic(frame: &[f64], rows: usize, cols: usize, out_cols: usize) -> Result<Vec<f64>> {
    if frame.len() != rows * cols {
        return Err(CoreError::Shape(format!("resize: {} values for {rows}x{cols}", frame.len())));
    }
    if cols < 4 || out_cols == 0 {
        return Err(CoreError::Shape(format!("resize: need at least 4 input columns, got {cols}")));
    }
    if frame.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NumericInput("resize: non-finite pixel".into()));
    }
    let scale = cols as f64 / out_cols as f64;
    let taps: Vec<([usize; 4], [f64; 4])> = (0..out_cols)
        .map(|j| {
            let src = (j as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let mut idx = [0usize; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let offset = k as f64 - 1.0;
                idx[k] = (base + offset).clamp(0.0, (cols - 1) as f64) as usize;
                w[k] = cubic_weight(frac - offset);
            }
            (idx, w)
        })
        .collect();
    let mut out = Vec::with_capacity(rows * out_cols);
    for row in frame.chunks_exact(cols) {
        for (idx, w) in &taps {
            out.push((0..4).map(|k| row[idx[k]] * w[k]).sum());
        }
    }
    Ok(out)
}

pub fn normalize_pixel(x: f64) -> f64 {
    x / PIXEL_SCALE - 1.0
}

pub fn normalize_pixels(frame: &[u8]) -> Vec<f64> {
    frame.iter().map(|&x| normalize_pixel(x as f64)).collect()
}

/// Resizes every raw `64 × 842` frame to `64 × 128` and maps it to `[-1, 1]`.
///
/// Cubic overshoot is clipped back to the 8-bit range before normalization
/// so every output pixel stays within `[-1, 1]`.
pub fn preprocess_frames(raw: &[u8], n_frames: usize) -> Result<Vec<f32>> {
    let frame_len = SCANLINES * RAW_SAMPLES_PER_LINE;
    if raw.len() != n_frames * frame_len {
        return Err(CoreError::Shape(format!("{} bytes for {n_frames} frames of {frame_len}", raw.len())));
    }
    let mut out = Vec::with_capacity(n_frames * SCANLINES * SAMPLES_PER_LINE);
    let mut buf = vec![0.0; frame_len];
    for frame in raw.chunks_exact(frame_len) {
        for (b, &p) in buf.iter_mut().zip(frame) {
            *b = p as f64;
        }
        let resized = resize_bicubic(&buf, SCANLINES, RAW_SAMPLES_PER_LINE, SAMPLES_PER_LINE)?;
        out.extend(resized.into_iter().map(|v| normalize_pixel(v.clamp(0.0, 255.0)) as f32));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_interpolates() {
        assert_eq!(cubic_weight(0.0), 1.0);
        assert_eq!(cubic_weight(1.0), 0.0);
        assert_eq!(cubic_weight(2.0), 0.0);
        // Partition of unity at an arbitrary phase.
        let t = 0.3;
        let sum: f64 = [-1.0, 0.0, 1.0, 2.0].iter().map(|o| cubic_weight(t - o)).sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_are_preserved() {
        let frame = vec![100.0; 64 * 842];
        let out = resize_bicubic(&frame, 64, 842, 128).unwrap();
        assert_eq!(out.len(), 64 * 128);
        assert!(out.iter().all(|v| (v - 100.0).abs() < 1e-9));
    }

    #[test]
    fn same_size_is_identity() {
        let frame: Vec<f64> = (0..64 * 128).map(|i| ((i * 37) % 255) as f64).collect();
        let out = resize_bicubic(&frame, 64, 128, 128).unwrap();
        assert_eq!(out, frame);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(resize_bicubic(&[0.0; 6], 2, 3, 2), Err(CoreError::Shape(_))));
        let mut frame = vec![0.0; 8];
        frame[3] = f64::NAN;
        assert!(matches!(resize_bicubic(&frame, 2, 4, 2), Err(CoreError::NumericInput(_))));
    }

    #[test]
    fn pixel_endpoints() {
        assert_eq!(normalize_pixel(0.0), -1.0);
        assert_eq!(normalize_pixel(255.0), 1.0);
        assert!((normalize_pixel(51.0) + 0.6).abs() < 1e-12);
    }

    #[test]
    fn preprocessed_frames_stay_in_range() {
        // A hard edge makes the cubic kernel overshoot before clipping.
        let raw: Vec<u8> = (0..64 * 842).map(|i| if (i % 842) < 421 { 0 } else { 255 }).collect();
        let out = preprocess_frames(&raw, 1).unwrap();
        assert_eq!(out.len(), 64 * 128);
        assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    proptest! {
        #[test]
        fn resize_is_linear(
            a in prop::collection::vec(-100.0f64..100.0, 4 * 12),
            b in prop::collection::vec(-100.0f64..100.0, 4 * 12),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let ra = resize_bicubic(&a, 4, 12, 5).unwrap();
            let rb = resize_bicubic(&b, 4, 12, 5).unwrap();
            let rm = resize_bicubic(&mix, 4, 12, 5).unwrap();
            for i in 0..rm.len() {
                prop_assert!((rm[i] - (alpha * ra[i] + beta * rb[i])).abs() < 1e-9);
            }
        }

        #[test]
        fn normalization_is_monotone(x in 0u8..255) {
            prop_assert!(normalize_pixel(x as f64) < normalize_pixel(x as f64 + 1.0));
        }
    }
}
