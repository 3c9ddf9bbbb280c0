use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ultraspeech_models::{build_forward, conformer_block, count_parameters, Model, ModelKind, ModelSpec};
use ultraspeech_nn::gradcheck::check_gradients;
use ultraspeech_nn::{Graph, Mode, Tensor, NORM_EPS};

fn random_frames(seed: u64, n: usize, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Layer-by-layer sum for a Conformer with `extra` scalars after the block.
fn conformer_closed_form(d: usize, ff: usize, kernel: usize, steps: usize, width: usize, out: usize, extra: usize) -> usize {
    let affine = |i: usize, o: usize| i * o + o;
    let ln = 2 * d;
    let ffn = ln + affine(d, ff) + affine(ff, d);
    let mhsa = ln + 4 * affine(d, d) + d * d + 2 * d;
    let conv = ln + affine(d, 2 * d) + kernel * d + d + ln + affine(d, d);
    let block = 2 * ffn + mhsa + conv + ln;
    affine(width, d) + block + extra + affine(steps * d, out)
}

fn lstm(input: usize, hidden: usize) -> usize {
    input * 4 * hidden + hidden * 4 * hidden + 4 * hidden
}

#[test]
fn published_parameter_budgets() {
    let conformer = count_parameters(&ModelSpec::new(ModelKind::ConformerBase)).unwrap();
    let bilstm = count_parameters(&ModelSpec::new(ModelKind::ConformerBilstm)).unwrap();
    let cnn = count_parameters(&ModelSpec::new(ModelKind::BaselineCnn)).unwrap();
    assert!((conformer as f64 / 2.66e6 - 1.0).abs() < 0.03, "{conformer}");
    assert!((bilstm as f64 / 5.35e6 - 1.0).abs() < 0.03, "{bilstm}");
    assert!((cnn as f64 / 4.09e6 - 1.0).abs() < 0.05, "{cnn}");
    // Frozen exact values.
    assert_eq!(conformer, 2_735_952);
    assert_eq!(bilstm, 5_427_024);
    assert_eq!(cnn, 4_087_970);
}

#[test]
fn counts_match_closed_form() {
    let base = ModelSpec::new(ModelKind::ConformerBase);
    assert_eq!(count_parameters(&base).unwrap(), conformer_closed_form(256, 768, 31, 64, 128, 80, 256 * 256 + 256));
    let toy = ModelSpec::toy(ModelKind::ConformerBase);
    assert_eq!(count_parameters(&toy).unwrap(), conformer_closed_form(8, 24, 3, 16, 16, 3, 8 * 8 + 8));
    let toy = ModelSpec::toy(ModelKind::ConformerBilstm);
    let extra = 2 * lstm(8, 3) + 2 * lstm(6, 3) + 6 * 8 + 8;
    assert_eq!(count_parameters(&toy).unwrap(), conformer_closed_form(8, 24, 3, 16, 16, 3, extra));
    // conv 3x3: 1->2, 2->3, 3->2, 2->2; 16x16 shrinks to 1x1; dense 2->4->3.
    let cnn = (9 * 2 + 2) + (9 * 2 * 3 + 3) + (9 * 3 * 2 + 2) + (9 * 2 * 2 + 2) + (2 * 4 + 4) + (4 * 3 + 3);
    assert_eq!(count_parameters(&ModelSpec::toy(ModelKind::BaselineCnn)).unwrap(), cnn);
}

#[test]
fn full_size_models_emit_80_finite_values_deterministically() {
    for kind in ModelKind::ALL {
        let model = Model::<f32>::new(ModelSpec::new(kind), 1).unwrap();
        let frames: Vec<f32> = random_frames(2, 2, 64 * 128).into_iter().map(|v| v as f32).collect();
        let a = model.predict(&frames).unwrap();
        assert_eq!(a.len(), 2 * 80, "{kind}");
        assert!(a.iter().all(|v| v.is_finite()), "{kind}");
        assert_eq!(a, model.predict(&frames).unwrap(), "{kind}");
    }
}

#[test]
fn predictions_depend_only_on_their_own_frame() {
    for kind in ModelKind::ALL {
        let spec = ModelSpec::toy(kind);
        let model = Model::<f64>::new(spec.clone(), 3).unwrap();
        let len = spec.frame_len();
        let frames = random_frames(4, 3, len);
        let base = model.predict(&frames).unwrap();
        let mut perturbed = frames.clone();
        for v in &mut perturbed[..len] {
            *v = -*v;
        }
        let out = model.predict(&perturbed).unwrap();
        let o = spec.output_dim;
        assert_ne!(out[..o], base[..o], "{kind}");
        assert_eq!(out[o..], base[o..], "{kind}");
    }
}

#[test]
fn conformer_sees_beam_line_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = Model::<f32>::new(ModelSpec::new(ModelKind::ConformerBase), 6).unwrap();
    let frame: Vec<f32> = (0..64 * 128).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut order: Vec<usize> = (0..64).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let permuted: Vec<f32> = order.iter().flat_map(|&s| frame[s * 128..(s + 1) * 128].iter().copied()).collect();
    let a = model.predict(&frame).unwrap();
    let b = model.predict(&permuted).unwrap();
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
    assert!(diff > 1e-4, "output invariant to beam-line permutation: {diff}");
}

#[test]
fn bilstm_sees_step_direction() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = Model::<f32>::new(ModelSpec::new(ModelKind::ConformerBilstm), 9).unwrap();
    let frame: Vec<f32> = (0..64 * 128).map(|_| rng.random_range(-1.0..1.0)).collect();
    let reversed: Vec<f32> = (0..64).rev().flat_map(|s| frame[s * 128..(s + 1) * 128].iter().copied()).collect();
    let a = model.predict(&frame).unwrap();
    let b = model.predict(&reversed).unwrap();
    assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-4));
}

#[test]
fn zeroed_output_projections_reduce_block_to_layer_norm() {
    let spec = ModelSpec::toy(ModelKind::ConformerBase);
    let mut model = Model::<f64>::new(spec.clone(), 10).unwrap();
    for name in ["block.ffn1.down", "block.ffn2.down", "block.mhsa.out", "block.conv.pw2"] {
        for part in ["w", "b"] {
            let id = model.params().id(&format!("{name}.{part}")).unwrap();
            model.params_mut().get_mut(id).data_mut().fill(0.0);
        }
    }
    let d = spec.block.encoder_dim;
    let rows = 2 * spec.scanlines;
    let x = random_frames(11, rows, d);
    let mut g = Graph::new(model.params(), Mode::Train);
    let xv = g.constant(Tensor::from_vec(&[rows, d], x.clone()).unwrap());
    let y = conformer_block(&mut g, xv, &spec.block, spec.scanlines).unwrap();
    for (row, out) in x.chunks_exact(d).zip(g.value(y).data().chunks_exact(d)) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        for (v, o) in row.iter().zip(out) {
            assert!(((v - mean) / (var + NORM_EPS).sqrt() - o).abs() < 1e-12);
        }
    }
}

#[test]
fn toy_architectures_pass_finite_difference_checks() {
    for kind in ModelKind::ALL {
        let spec = ModelSpec::toy(kind);
        let model = Model::<f64>::new(spec.clone(), 12).unwrap();
        let mut params = model.params().clone();
        let x = random_frames(13, 2, spec.frame_len());
        let target = random_frames(14, 2, spec.output_dim);
        let report = check_gradients(&mut params, 1e-4, |g| {
            let xv = g.constant(Tensor::from_vec(&[2, spec.frame_len()], x.clone())?);
            let t = g.constant(Tensor::from_vec(&[2, spec.output_dim], target.clone())?);
            let y = build_forward(&spec, g, xv).map_err(|e| ultraspeech_nn::NnError::Shape(e.to_string()))?;
            g.mse(y, t)
        })
        .unwrap();
        assert_eq!(report.checked, count_parameters(&spec).unwrap());
        assert!(report.max_rel_error < 1e-3, "{kind}: {report:?}");
    }
}
