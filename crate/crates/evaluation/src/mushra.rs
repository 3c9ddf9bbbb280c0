use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::mann_whitney::mann_whitney_u;
use crate::{EvalError, Result};

/// How listener × utterance cells are combined; reported alongside results.
pub const MUSHRA_POOLING: &str = "pooled listener x utterance cells";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MushraRating {
    pub listener: String,
    pub utterance: String,
    pub system: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: String,
    pub n: usize,
    pub mean: f64,
    /// Half width of the 95% t-interval; absent for a single rating.
    pub ci95: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemPair {
    pub a: String,
    pub b: String,
    pub u: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MushraStats {
    pub systems: Vec<SystemSummary>,
    pub pairs: Vec<SystemPair>,
    pub pooling: String,
}

/// Per-system mean and 95% confidence interval over all rated cells, plus
/// pairwise Mann-Whitney tests between systems. Systems are reported in
/// lexicographic order.
pub fn mushra_stats(ratings: &[MushraRating]) -> Result<MushraStats> {
    let mut by_system: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in ratings {
        if !(r.score.is_finite() && (0.0..=100.0).contains(&r.score)) {
            return Err(EvalError::Validation(format!("rating {} by {} for {} is outside [0, 100]", r.score, r.listener, r.system)));
        }
        by_system.entry(r.system.as_str()).or_default().push(r.score);
    }
    let systems = by_system
        .iter()
        .map(|(name, scores)| {
            let n = scores.len();
            let mean = scores.iter().sum::<f64>() / n as f64;
            let ci95 = (n > 1).then(|| {
                let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
                t * (var / n as f64).sqrt()
            });
            SystemSummary { system: name.to_string(), n, mean, ci95 }
        })
        .collect();
    let names: Vec<&str> = by_system.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let t = mann_whitney_u(&by_system[a], &by_system[b])?;
            pairs.push(SystemPair { a: a.to_string(), b: b.to_string(), u: t.u, p: t.p_two_sided });
        }
    }
    Ok(MushraStats { systems, pairs, pooling: MUSHRA_POOLING.into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(listener: &str, system: &str, score: f64) -> MushraRating {
        MushraRating { listener: listener.into(), utterance: "u1".into(), system: system.into(), score }
    }

    #[test]
    fn three_ratings_interval() {
        let r = [rating("a", "s", 40.0), rating("b", "s", 50.0), rating("c", "s", 60.0)];
        let s = mushra_stats(&r).unwrap();
        assert_eq!(s.systems[0].mean, 50.0);
        let expected = 4.302_652_729_911_275 * 10.0 / 3f64.sqrt();
        assert!((s.systems[0].ci95.unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn constant_ratings_have_zero_width() {
        let r: Vec<_> = (0..5).map(|i| rating(&i.to_string(), "ref", 100.0)).collect();
        let s = mushra_stats(&r).unwrap();
        assert_eq!((s.systems[0].mean, s.systems[0].ci95), (100.0, Some(0.0)));
    }

    #[test]
    fn identical_columns_are_indistinguishable() {
        let scores = [20.0, 35.0, 50.0, 80.0];
        let r: Vec<_> = scores.iter().enumerate().flat_map(|(i, &s)| [rating(&i.to_string(), "x", s), rating(&i.to_string(), "y", s)]).collect();
        let s = mushra_stats(&r).unwrap();
        assert_eq!(s.pairs.len(), 1);
        assert_eq!(s.pairs[0].p, 1.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(matches!(mushra_stats(&[rating("a", "s", 101.0)]), Err(EvalError::Validation(_))));
        assert!(mushra_stats(&[rating("a", "s", -0.5)]).is_err());
    }
}
