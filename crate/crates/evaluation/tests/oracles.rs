use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ultraspeech_core::dsp::{MelSpectrogram, MelStats};
use ultraspeech_core::N_MELS;
use ultraspeech_evaluation::*;

fn standardized(values: Vec<f64>, frames: usize) -> MelSpectrogram {
    MelSpectrogram::new_standardized(values, frames, MelStats::new(vec![0.0; N_MELS], vec![1.0; N_MELS]).unwrap()).unwrap()
}

#[test]
fn sentence_mse_matches_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for frames in [1, 7, 33] {
        let a: Vec<f64> = (0..frames * N_MELS).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..frames * N_MELS).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut sum = 0.0;
        for t in 0..frames {
            for m in 0..N_MELS {
                let d = a[t * N_MELS + m] - b[t * N_MELS + m];
                sum += d * d;
            }
        }
        let oracle = sum / (frames * N_MELS) as f64;
        let got = sentence_mse(&standardized(a, frames), &standardized(b, frames)).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }
    let x = standardized(vec![0.5; 4 * N_MELS], 4);
    assert_eq!(sentence_mse(&x, &x).unwrap(), 0.0);
    assert_eq!(sentence_mse(&standardized(vec![1.5; 4 * N_MELS], 4), &x).unwrap(), 1.0);
    assert!(matches!(sentence_mse(&x, &standardized(vec![0.0; 3 * N_MELS], 3)), Err(EvalError::IncompatibleInput(_))));
}

/// U and two-sided p by listing every assignment of pooled values to the
/// first sample.
fn enumerate(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let u_of = |first: &[f64], second: &[f64]| -> f64 {
        first.iter().map(|x| second.iter().map(|y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }).sum::<f64>()).sum()
    };
    let observed = u_of(a, b);
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let (first, second): (Vec<f64>, Vec<f64>) = {
            let (mut f, mut s) = (Vec::new(), Vec::new());
            for (i, &v) in pooled.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    f.push(v)
                } else {
                    s.push(v)
                }
            }
            (f, s)
        };
        let u = u_of(&first, &second);
        total += 1;
        le += (u <= observed) as u64;
        ge += (u >= observed) as u64;
    }
    (observed, (2.0 * le.min(ge) as f64 / total as f64).min(1.0))
}

#[test]
fn exact_test_matches_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let total = rng.random_range(2..=10);
        let n1 = rng.random_range(1..total);
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(0.0..100.0)).collect();
        let b: Vec<f64> = (0..total - n1).map(|_| rng.random_range(0.0..100.0)).collect();
        let (u, p) = enumerate(&a, &b);
        let got = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(got.method, PValueMethod::Exact);
        assert_eq!(got.u, u);
        assert!((got.p_two_sided - p).abs() < 1e-12, "{a:?} {b:?}: {} vs {p}", got.p_two_sided);
    }
}

#[test]
fn exact_and_normal_agree_at_ten_by_ten() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for shift in [0.0, 0.3, 0.8, 1.5] {
        let a: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..2.0)).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..2.0) + shift).collect();
        let exact = mann_whitney_u_with(&a, &b, TestMode::Exact).unwrap().p_two_sided;
        let normal = mann_whitney_u_with(&a, &b, TestMode::Normal).unwrap().p_two_sided;
        assert!((exact - normal).abs() < 0.05, "shift {shift}: {exact} vs {normal}");
    }
}

#[test]
fn large_tied_samples_use_normal_approximation() {
    let a: Vec<f64> = (0..15).map(|i| (i % 4) as f64).collect();
    let b: Vec<f64> = (0..12).map(|i| (i % 5) as f64).collect();
    let r = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(r.method, PValueMethod::Normal);
    assert_eq!(r.u, enumerate_u(&a, &b));
    assert!((0.0..=1.0).contains(&r.p_two_sided));
}

fn enumerate_u(a: &[f64], b: &[f64]) -> f64 {
    a.iter().map(|x| b.iter().map(|y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }).sum::<f64>()).sum()
}

proptest! {
    #[test]
    fn u_statistics_are_complementary(a in prop::collection::vec(0u8..20, 1..15), b in prop::collection::vec(0u8..20, 1..15)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(ab.u + ba.u, (a.len() * b.len()) as f64);
        prop_assert_eq!(ab.u, enumerate_u(&a, &b));
        prop_assert!((ab.p_two_sided - ba.p_two_sided).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_two_sided));
    }

    #[test]
    fn p_is_rank_invariant(seed in 0u64..1000, n1 in 1usize..14, n2 in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n1).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.random_range(-5.0..5.0)).collect();
        let f = |v: &[f64]| v.iter().map(|x| 2.0 * x + 1.0).collect::<Vec<_>>();
        let p = mann_whitney_u(&a, &b).unwrap().p_two_sided;
        let q = mann_whitney_u(&f(&a), &f(&b)).unwrap().p_two_sided;
        prop_assert!((p - q).abs() < 1e-12);
    }
}

fn ratings(table: &[(&str, &str, &str, f64)]) -> Vec<MushraRating> {
    table.iter().map(|&(l, u, s, score)| MushraRating { listener: l.into(), utterance: u.into(), system: s.into(), score }).collect()
}

#[test]
fn mushra_means_ignore_listener_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let listeners = ["l1", "l2", "l3", "l4"];
    let mut table = Vec::new();
    for l in listeners {
        for u in ["u1", "u2"] {
            for s in ["ref", "anchor", "sys"] {
                table.push((l, u, s, rng.random_range(0.0..100.0f64).round()));
            }
        }
    }
    let a = mushra_stats(&ratings(&table)).unwrap();
    table.reverse();
    let b = mushra_stats(&ratings(&table)).unwrap();
    for (x, y) in a.systems.iter().zip(&b.systems) {
        assert!((x.mean - y.mean).abs() < 1e-12);
        assert!((x.ci95.unwrap() - y.ci95.unwrap()).abs() < 1e-9);
    }
    assert_eq!(a.pooling, MUSHRA_POOLING);
}

#[test]
fn mushra_interval_is_t_times_standard_error() {
    let base = [30.0, 45.0, 52.0, 70.0, 64.0];
    let mut previous = f64::INFINITY;
    for copies in 1..=4 {
        let table: Vec<_> = (0..copies).flat_map(|c| base.iter().enumerate().map(move |(i, &s)| (format!("l{c}-{i}"), s))).collect();
        let r: Vec<MushraRating> = table.iter().map(|(l, s)| MushraRating { listener: l.clone(), utterance: "u".into(), system: "x".into(), score: *s }).collect();
        let stats = mushra_stats(&r).unwrap();
        let n = r.len() as f64;
        let mean = r.iter().map(|x| x.score).sum::<f64>() / n;
        let sd = (r.iter().map(|x| (x.score - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let t = t975(n - 1.0);
        let width = stats.systems[0].ci95.unwrap();
        assert!((width - t * sd / n.sqrt()).abs() < 1e-9);
        assert!(width < previous);
        previous = width;
    }
}

/// Published 0.975 Student-t quantiles for the degrees of freedom used above.
fn t975(df: f64) -> f64 {
    match df as usize {
        4 => 2.776_445_105_197_793,
        9 => 2.262_157_162_740_992,
        14 => 2.144_786_687_916_927_7,
        19 => 2.093_024_054_408_263,
        _ => panic!("no table entry for {df}"),
    }
}

fn scores(system: &str, values: &[(&str, &str, f64, f64)]) -> SystemScores {
    SystemScores { system: system.into(), sentences: values.iter().map(|&(s, u, mse, mcd)| SentenceScore { speaker: s.into(), utterance: u.into(), mse, mcd }).collect() }
}

#[test]
fn report_means_equal_hand_averages() {
    let base = scores("Baseline", &[("01", "a", 0.5, 3.0), ("01", "b", 0.7, 3.4), ("02", "a", 0.2, 2.0)]);
    let conf = scores("Conformer Base", &[("01", "b", 0.6, 3.1), ("01", "a", 0.4, 3.3), ("02", "a", 0.3, 2.5)]);
    let r = build_report(&[base.clone(), conf], "Baseline").unwrap();
    assert_eq!(r.speakers, vec!["01", "02"]);
    let c = r.cell("01", "Conformer Base").unwrap();
    assert!((c.mean_mse - (0.6 + 0.4) / 2.0).abs() < 1e-15);
    assert!((c.mean_mcd - (3.1 + 3.3) / 2.0).abs() < 1e-15);
    assert!(r.cell("01", "Baseline").unwrap().p_mse.is_none());
    assert!(r.is_finite());
    // The MSE table has one mean row per system and a p row under the proposed one.
    let table = r.mse_table();
    assert!(table.contains("Baseline") && table.contains("(p = "));
    assert_eq!(table.matches("(p = ").count(), 2);
    assert_eq!(r.to_jsonl().lines().count(), 4 + 6);

    let self_report = build_report(&[base.clone(), SystemScores { system: "Copy".into(), ..base.clone() }], "Baseline").unwrap();
    assert_eq!(self_report.cell("01", "Copy").unwrap().p_mse, Some(1.0));
    assert_eq!(self_report.cell("02", "Copy").unwrap().p_mcd, Some(1.0));
}

#[test]
fn report_rejects_mismatched_sentence_sets() {
    let base = scores("Baseline", &[("01", "a", 0.5, 3.0), ("01", "b", 0.7, 3.4)]);
    let other = scores("Other", &[("01", "a", 0.5, 3.0), ("01", "c", 0.7, 3.4)]);
    assert!(matches!(build_report(&[base.clone(), other], "Baseline"), Err(EvalError::IncompatibleInput(_))));
    assert!(build_report(&[base], "Missing").is_err());
}
