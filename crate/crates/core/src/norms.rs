//! Plug-in estimators of the `S^β` and `M^β` norms and a class (D) diagnostic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{jackknife_mean_fn, mean_estimate, norm, sup_of_means, Estimate};
use crate::types::SolutionField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: f64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimates {
    /// `(E[sup_t |Y_t|^β])^{1∧1/β}` per requested β.
    pub s_beta: Vec<BetaEstimate>,
    /// `(E[(∫|Z|² dt)^{β/2}])^{1∧1/β}` per requested β.
    pub m_beta: Vec<BetaEstimate>,
    pub sup_mean_abs: Estimate,
    /// Class (D) tail statistic at threshold `10 · sup_mean_abs`.
    pub class_d_proxy: Estimate,
}

impl NormEstimates {
    pub fn s(&self, beta: f64) -> Option<BetaEstimate> {
        self.s_beta.iter().copied().find(|e| e.beta == beta)
    }

    pub fn m(&self, beta: f64) -> Option<BetaEstimate> {
        self.m_beta.iter().copied().find(|e| e.beta == beta)
    }
}

fn check_field(field: &SolutionField) -> Result<()> {
    if field.path_count() < 2 {
        return Err(Error::MalformedInput(format!(
            "norm estimates need at least 2 paths, field has {}",
            field.path_count()
        )));
    }
    let bad = field.non_finite();
    if !bad.is_empty() {
        return Err(Error::contamination("solution field", bad));
    }
    Ok(())
}

/// `sup_t |Y_t|` per path.
pub fn sup_abs_y(field: &SolutionField) -> Vec<f64> {
    (0..field.path_count())
        .into_par_iter()
        .map(|p| (0..=field.steps()).map(|i| norm(field.y(i, p))).fold(0.0, f64::max))
        .collect()
}

/// `∫_0^T |Z_t|² dt` per path with left-endpoint rectangles.
pub fn z_energy(field: &SolutionField) -> Vec<f64> {
    let grid = field.grid();
    (0..field.path_count())
        .into_par_iter()
        .map(|p| {
            let mut s = 0.0;
            for i in 0..field.steps() {
                let z = field.z(i, p);
                s += z.iter().map(|v| v * v).sum::<f64>() * grid.dt(i);
            }
            s
        })
        .collect()
}

/// `(E[X^β])^{1∧1/β}` with a jackknife standard error.
pub fn beta_moment(xs: &[f64], beta: f64) -> Estimate {
    let outer = if beta <= 1.0 { 1.0 } else { 1.0 / beta };
    let powered: Vec<f64> = xs.iter().map(|x| x.powf(beta)).collect();
    jackknife_mean_fn(&powered, |m| m.max(0.0).powf(outer))
}

/// `|Y_t|` per time index, each row over paths.
pub fn abs_y_rows(field: &SolutionField) -> Vec<Vec<f64>> {
    (0..=field.steps())
        .map(|i| (0..field.path_count()).map(|p| norm(field.y(i, p))).collect())
        .collect()
}

pub fn estimate_norms(field: &SolutionField, betas: &[f64]) -> Result<NormEstimates> {
    check_field(field)?;
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b <= 2.0)) {
        return Err(Error::MalformedInput(format!("β must lie in (0, 2], got {b}")));
    }
    let sup = sup_abs_y(field);
    let energy: Vec<f64> = z_energy(field).into_iter().map(f64::sqrt).collect();
    let s_beta = betas
        .iter()
        .map(|&beta| {
            let e = beta_moment(&sup, beta);
            BetaEstimate {
                beta,
                value: e.value,
                std_error: e.std_error,
            }
        })
        .collect();
    let m_beta = betas
        .iter()
        .map(|&beta| {
            let e = beta_moment(&energy, beta);
            BetaEstimate {
                beta,
                value: e.value,
                std_error: e.std_error,
            }
        })
        .collect();
    let sup_mean_abs = sup_of_means(&abs_y_rows(field));
    let proxy_threshold = 10.0 * sup_mean_abs.value;
    let class_d_proxy = if proxy_threshold > 0.0 {
        tail_at(field, proxy_threshold)
    } else {
        Estimate::exact(0.0)
    };
    Ok(NormEstimates {
        s_beta,
        m_beta,
        sup_mean_abs,
        class_d_proxy,
    })
}

fn tail_at(field: &SolutionField, threshold: f64) -> Estimate {
    let vals: Vec<f64> = (0..field.path_count())
        .into_par_iter()
        .map(|p| {
            let hit = (0..=field.steps())
                .map(|i| norm(field.y(i, p)))
                .find(|v| *v > threshold);
            hit.unwrap_or(0.0)
        })
        .collect();
    mean_estimate(&vals)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub value: f64,
    pub std_error: f64,
}

/// `E[|Y_τ| 1{|Y_τ| > c}]` with `τ` the first grid time at which `|Y|`
/// exceeds `c` (the horizon when it never does), for each threshold `c`.
pub fn class_d_diagnostic(field: &SolutionField, thresholds: &[f64]) -> Result<Vec<TailEstimate>> {
    if thresholds.is_empty() {
        return Err(Error::MalformedInput("empty threshold list".into()));
    }
    if thresholds.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::MalformedInput("thresholds must be positive and finite".into()));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::MalformedInput("thresholds must be strictly increasing".into()));
    }
    check_field(field)?;
    Ok(thresholds
        .iter()
        .map(|&c| {
            let e = tail_at(field, c);
            TailEstimate {
                threshold: c,
                value: e.value,
                std_error: e.std_error,
            }
        })
        .collect())
}

/// Whether the largest-threshold tail value is below `eps`.
pub fn class_d_passes(tails: &[TailEstimate], eps: f64) -> bool {
    tails.last().is_some_and(|t| t.value < eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::TimeGrid;
    use crate::types::Dimensions;

    fn constant_field(c: &[f64], m: usize) -> SolutionField {
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let dims = Dimensions::new(c.len(), 1).unwrap();
        let y: Vec<f64> = (0..6 * m).flat_map(|_| c.iter().copied()).collect();
        SolutionField::from_parts(grid, dims, m, y, vec![0.0; 6 * m * c.len()]).unwrap()
    }

    #[test]
    fn constant_field_norms() {
        let f = constant_field(&[0.0, 3.0, 0.0], 4);
        let est = estimate_norms(&f, &[0.5, 1.0, 2.0]).unwrap();
        assert!((est.s(1.0).unwrap().value - 3.0).abs() < 1e-14);
        assert!((est.s(0.5).unwrap().value - 3f64.sqrt()).abs() < 1e-14);
        assert!((est.s(2.0).unwrap().value - 3.0).abs() < 1e-14);
        assert!(est.m_beta.iter().all(|m| m.value == 0.0));
        assert_eq!(est.sup_mean_abs.value, 3.0);
    }

    #[test]
    fn unit_z_has_unit_m1() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let dims = Dimensions::new(1, 1).unwrap();
        let f = SolutionField::from_parts(grid, dims, 3, vec![0.0; 33], vec![1.0; 33]).unwrap();
        let est = estimate_norms(&f, &[1.0]).unwrap();
        assert!((est.m(1.0).unwrap().value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let mut f = constant_field(&[1.0], 3);
        assert!(estimate_norms(&f, &[3.0]).is_err());
        f.y_at_mut(2)[1] = f64::NAN;
        match estimate_norms(&f, &[1.0]) {
            Err(Error::NumericContamination { first, .. }) => assert_eq!(first, vec![(2, 1)]),
            other => panic!("unexpected {other:?}"),
        }
        let single = constant_field(&[1.0], 1);
        assert!(estimate_norms(&single, &[1.0]).is_err());
    }

    #[test]
    fn bounded_field_has_no_tail() {
        let f = constant_field(&[1.0], 10);
        let tails = class_d_diagnostic(&f, &[2.0, 4.0]).unwrap();
        assert!(tails.iter().all(|t| t.value == 0.0));
        assert!(class_d_diagnostic(&f, &[]).is_err());
        assert!(class_d_diagnostic(&f, &[2.0, 2.0]).is_err());
    }

    #[test]
    fn single_outlier_tail() {
        let m = 10_000;
        let grid = TimeGrid::uniform(1.0, 1).unwrap();
        let dims = Dimensions::new(1, 1).unwrap();
        let mut y = vec![0.5; 2 * m];
        y[m + 17] = 1e6;
        let f = SolutionField::from_parts(grid, dims, m, y, vec![0.0; 2 * m]).unwrap();
        let tails = class_d_diagnostic(&f, &[10.0]).unwrap();
        assert!((tails[0].value - 100.0).abs() < 1e-9);
    }
}
