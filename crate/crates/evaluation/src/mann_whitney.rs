use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{EvalError, Result};

/// Largest combined sample size for which the exact null distribution is used.
pub const EXACT_MAX_TOTAL: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMode {
    /// Exact when the samples are small and tie-free, normal otherwise.
    Auto,
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Statistic of the first sample: its mid-rank sum minus `n₁(n₁+1)/2`.
    pub u: f64,
    pub p_two_sided: f64,
    pub method: PValueMethod,
}

/// Mid-ranks (1-based) of the pooled sample and the tie group sizes.
fn mid_ranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Number of ways to pick `n1` of `n1 + n2` ranks for each value of U,
/// built with the recurrence `f(n1, n2, u) = f(n1 - 1, n2, u - n2) + f(n1, n2 - 1, u)`.
fn exact_u_counts(n1: usize, n2: usize) -> Vec<f64> {
    let max_u = n1 * n2;
    // table[a][b] holds the counts for samples of size a and b.
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n2 + 1]; n1 + 1];
    for a in 0..=n1 {
        for b in 0..=n2 {
            let mut counts = vec![0.0; a * b + 1];
            if a == 0 || b == 0 {
                counts[0] = 1.0;
            } else {
                // Largest pooled value belongs to the first sample: it beats all b.
                for (u, c) in table[a - 1][b].iter().enumerate() {
                    counts[u + b] += c;
                }
                for (u, c) in table[a][b - 1].iter().enumerate() {
                    counts[u] += c;
                }
            }
            table[a][b] = counts;
        }
    }
    let out = std::mem::take(&mut table[n1][n2]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}

fn exact_p(u: f64, n1: usize, n2: usize) -> f64 {
    let counts = exact_u_counts(n1, n2);
    let total: f64 = counts.iter().sum();
    let eps = 1e-9;
    let lower: f64 = counts.iter().enumerate().filter(|(k, _)| (*k as f64) <= u + eps).map(|(_, c)| c).sum();
    let upper: f64 = counts.iter().enumerate().filter(|(k, _)| (*k as f64) >= u - eps).map(|(_, c)| c).sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(u: f64, n1: usize, n2: usize, ties: &[usize]) -> f64 {
    let (f1, f2) = (n1 as f64, n2 as f64);
    let n = f1 + f2;
    let mean = f1 * f2 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / (n * (n - 1.0));
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 || !var.is_finite() {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * phi.sf(z)).clamp(0.0, 1.0)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    mann_whitney_u_with(a, b, TestMode::Auto)
}

/// Two-sided Mann-Whitney U test of `a` against `b`.
///
/// In [`TestMode::Auto`] the p-value comes from the exact permutation
/// distribution when `|a| + |b| ≤ 20` and there are no ties, and from the
/// tie- and continuity-corrected normal approximation otherwise.
/// Requesting [`TestMode::Exact`] on tied data is a precondition error.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], mode: TestMode) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Precondition("both samples must be non-empty".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::Precondition("samples must be finite".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = mid_ranks(&pooled);
    let rank_sum: f64 = ranks[..n1].iter().sum();
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    let tied = ties.iter().any(|&t| t > 1);
    let method = match mode {
        TestMode::Exact if tied => return Err(EvalError::Precondition("exact test requires tie-free samples".into())),
        TestMode::Exact => PValueMethod::Exact,
        TestMode::Normal => PValueMethod::Normal,
        TestMode::Auto if !tied && n1 + n2 <= EXACT_MAX_TOTAL => PValueMethod::Exact,
        TestMode::Auto => PValueMethod::Normal,
    };
    let p = match method {
        PValueMethod::Exact => exact_p(u, n1, n2),
        PValueMethod::Normal => normal_p(u, n1, n2, &ties),
    };
    Ok(MannWhitney { u, p_two_sided: p, method })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_worked_cases() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p_two_sided - 2.0 / 6.0).abs() < 1e-12);
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.p_two_sided - 0.1).abs() < 1e-12);
        let r = mann_whitney_u(&[5.0; 3], &[5.0; 3]).unwrap();
        assert_eq!((r.u, r.p_two_sided, r.method), (4.5, 1.0, PValueMethod::Normal));
    }

    #[test]
    fn mid_ranks_average_ties() {
        let (ranks, ties) = mid_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(ranks, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(ties, vec![1, 1, 2]);
    }

    #[test]
    fn exact_counts_are_symmetric_binomial_totals() {
        let c = exact_u_counts(4, 6);
        assert_eq!(c.iter().sum::<f64>(), 210.0);
        for u in 0..c.len() {
            assert_eq!(c[u], c[c.len() - 1 - u]);
        }
    }

    #[test]
    fn empty_and_tied_exact_inputs_are_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
        assert!(mann_whitney_u_with(&[1.0, 2.0], &[2.0], TestMode::Exact).is_err());
    }
}
