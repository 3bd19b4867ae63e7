//! Distances between two fields on the same paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::norms::BetaEstimate;
use crate::numeric::{jackknife_mean_fn, mean_estimate, sup_of_means, Estimate};
use crate::types::SolutionField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDistance {
    /// `sup_t mean |Δy_t|`.
    pub sup_mean_abs_dy: Estimate,
    /// `E[sup_t |Δy_t|^β]` per β (normalized by `1∧1/β`, which is 1 here).
    pub e_sup_dy: Vec<BetaEstimate>,
    /// `E[(∫|Δz|² dt)^{β/2}]` per β.
    pub m_dz: Vec<BetaEstimate>,
    /// `E[sup_t |Δy_t|^β + (∫|Δz|² dt)^{β/2}]` per β.
    pub combined: Vec<BetaEstimate>,
}

impl FieldDistance {
    pub fn at(list: &[BetaEstimate], beta: f64) -> Option<BetaEstimate> {
        list.iter().copied().find(|e| e.beta == beta)
    }
}

/// Per-path `sup |Δy|` over time indices `lo..=hi` and `∫|Δz|²` over
/// `lo..hi`, plus the per-time rows of `|Δy|`.
pub(crate) fn path_differences(
    a: &SolutionField,
    b: &SolutionField,
    lo: usize,
    hi: usize,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let m = a.path_count();
    let grid = a.grid();
    let rows: Vec<Vec<f64>> = (lo..=hi)
        .map(|i| (0..m).map(|p| dist(a.y(i, p), b.y(i, p))).collect())
        .collect();
    let sup: Vec<f64> = (0..m).map(|p| rows.iter().map(|r| r[p]).fold(0.0, f64::max)).collect();
    let energy: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|p| {
            let mut s = 0.0;
            for i in lo..hi {
                let d2: f64 = a.z(i, p).iter().zip(b.z(i, p)).map(|(x, y)| (x - y) * (x - y)).sum();
                s += d2 * grid.dt(i);
            }
            s
        })
        .collect();
    (sup, energy, rows)
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn beta_est(beta: f64, e: Estimate) -> BetaEstimate {
    BetaEstimate {
        beta,
        value: e.value,
        std_error: e.std_error,
    }
}

/// Distances over time indices `lo..=hi`; `β ∈ (0, 1]`.
pub fn field_distance_window(
    a: &SolutionField,
    b: &SolutionField,
    betas: &[f64],
    lo: usize,
    hi: usize,
) -> FieldDistance {
    let (sup, energy, rows) = path_differences(a, b, lo, hi);
    let sup_mean_abs_dy = sup_of_means(&rows);
    let mut e_sup_dy = Vec::new();
    let mut m_dz = Vec::new();
    let mut combined = Vec::new();
    for &beta in betas {
        let ys: Vec<f64> = sup.iter().map(|s| s.powf(beta)).collect();
        let zs: Vec<f64> = energy.iter().map(|e| e.powf(beta / 2.0)).collect();
        let both: Vec<f64> = ys.iter().zip(&zs).map(|(y, z)| y + z).collect();
        e_sup_dy.push(beta_est(beta, mean_estimate(&ys)));
        m_dz.push(beta_est(beta, jackknife_mean_fn(&zs, |m| m)));
        combined.push(beta_est(beta, mean_estimate(&both)));
    }
    FieldDistance {
        sup_mean_abs_dy,
        e_sup_dy,
        m_dz,
        combined,
    }
}

/// Distances over the whole grid.
pub fn field_distance(a: &SolutionField, b: &SolutionField, betas: &[f64]) -> FieldDistance {
    field_distance_window(a, b, betas, 0, a.steps())
}
