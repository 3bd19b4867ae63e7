//! Deterministic reductions and jackknife standard errors.
//!
//! Every sum over paths in the crate goes through [`pairwise_sum`], so results
//! do not depend on how many worker threads produced the summands.

use serde::{Deserialize, Serialize};

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (tree) summation with a fixed split pattern.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// A point estimate with its jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0 }
    }
}

/// Delete-one jackknife for a smooth function of a sample mean.
///
/// The leave-one-out means are formed from the full sum, so the cost is linear
/// in the sample size.
pub fn jackknife_mean_fn(xs: &[f64], f: impl Fn(f64) -> f64) -> Estimate {
    let n = xs.len();
    let total = pairwise_sum(xs);
    let value = f(total / n as f64);
    if n < 2 {
        return Estimate { value, std_error: 0.0 };
    }
    let loo: Vec<f64> = xs.iter().map(|&x| f((total - x) / (n - 1) as f64)).collect();
    Estimate {
        value,
        std_error: jackknife_spread(&loo),
    }
}

/// Sample mean with its standard error (the delete-one jackknife of the mean).
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    jackknife_mean_fn(xs, |m| m)
}

/// Jackknife standard error from leave-one-out replicates.
pub fn jackknife_spread(replicates: &[f64]) -> f64 {
    let n = replicates.len();
    if n < 2 {
        return 0.0;
    }
    let centre = mean(replicates);
    let dev: Vec<f64> = replicates.iter().map(|r| (r - centre) * (r - centre)).collect();
    ((n - 1) as f64 / n as f64 * pairwise_sum(&dev)).sqrt()
}

/// `sup_t mean_p a[t][p]` with a delete-one jackknife over paths.
///
/// `rows[t]` holds the per-path values at time index `t`; all rows must have
/// the same length.
pub fn sup_of_means(rows: &[Vec<f64>]) -> Estimate {
    use rayon::prelude::*;

    let n = rows.first().map_or(0, Vec::len);
    let sums: Vec<f64> = rows.iter().map(|r| pairwise_sum(r)).collect();
    let value = sums.iter().map(|s| s / n as f64).fold(f64::NEG_INFINITY, f64::max);
    if n < 2 || rows.is_empty() {
        return Estimate {
            value: if rows.is_empty() { 0.0 } else { value },
            std_error: 0.0,
        };
    }
    let loo: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|p| {
            rows.iter()
                .zip(&sums)
                .map(|(r, s)| (s - r[p]) / (n - 1) as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Estimate {
        value,
        std_error: jackknife_spread(&loo),
    }
}

/// Euclidean norm, rescaled when the plain sum of squares would overflow or
/// underflow.
pub fn norm(v: &[f64]) -> f64 {
    let ss: f64 = v.iter().map(|x| x * x).sum();
    if ss.is_finite() && ss > 1e-290 || ss == 0.0 && v.iter().all(|x| *x == 0.0) {
        return ss.sqrt();
    }
    let m = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return if m.is_nan() || v.iter().any(|x| x.is_nan()) {
            f64::NAN
        } else {
            m
        };
    }
    m * v.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_survives_extreme_magnitudes() {
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(norm(&[]), 0.0);
        assert!((norm(&[3e200, 4e200]) / 5e200 - 1.0).abs() < 1e-15);
        assert!((norm(&[3e-200, 4e-200]) / 5e-200 - 1.0).abs() < 1e-15);
        assert_eq!(norm(&[1e305]), 1e305);
        assert_eq!(norm(&[f64::INFINITY, 1.0]), f64::INFINITY);
        assert!(norm(&[f64::NAN, 1.0]).is_nan());
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn jackknife_of_mean_is_classical_standard_error() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let est = mean_estimate(&xs);
        let m = 5.0;
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0;
        assert!((est.value - m).abs() < 1e-12);
        assert!((est.std_error - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sup_of_means_picks_largest_row() {
        let rows = vec![vec![1.0, 1.0, 1.0], vec![2.0, 4.0, 6.0]];
        let est = sup_of_means(&rows);
        assert_eq!(est.value, 4.0);
        assert!(est.std_error > 0.0);
    }
}
