//! Least-squares projection onto functions of the current Brownian state.
//!
//! Inputs are standardized per coordinate before the basis is applied.
//! Coordinates with no spread (every coordinate at `t_0 = 0`) drop out, so the
//! projection at the initial time is the sample mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PathBundle;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

pub const DEFAULT_RIDGE: f64 = 1e-8;

const CHUNK: usize = 1024;
const PIVOT_RTOL: f64 = 1e-12;
const EDGE: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BasisKind {
    /// All monomials of total degree at most `degree`.
    Polynomial { degree: usize },
    /// Indicators of a tensor grid with `bins` cells per axis on `[-3, 3]`
    /// standardized units (outer cells unbounded).
    PiecewiseConstant { bins: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionBasis {
    pub kind: BasisKind,
    /// Ridge added to the normalized Gram matrix when it is rank deficient.
    pub ridge: f64,
}

impl Default for RegressionBasis {
    fn default() -> Self {
        RegressionBasis {
            kind: BasisKind::Polynomial { degree: 3 },
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl RegressionBasis {
    pub fn polynomial(degree: usize) -> Self {
        RegressionBasis {
            kind: BasisKind::Polynomial { degree },
            ..Default::default()
        }
    }

    pub fn piecewise_constant(bins: usize) -> Self {
        RegressionBasis {
            kind: BasisKind::PiecewiseConstant { bins },
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Terms {
    /// Exponents over the active coordinates.
    Monomials(Vec<Vec<u32>>),
    /// Constant plus indicators of these occupied cells.
    Cells { bins: usize, cells: Vec<usize> },
}

/// Feature map with its standardization frozen from the fitting sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    center: Vec<f64>,
    scale: Vec<f64>,
    /// Indices of input coordinates with nonzero spread.
    active: Vec<usize>,
    terms: Terms,
}

impl FeatureMap {
    fn fit(states: &[f64], d: usize, kind: BasisKind) -> Result<FeatureMap> {
        let m = states.len() / d;
        let mut center = vec![0.0; d];
        let mut scale = vec![0.0; d];
        let mut active = Vec::new();
        for j in 0..d {
            let col: Vec<f64> = (0..m).map(|p| states[p * d + j]).collect();
            let mu = pairwise_sum(&col) / m as f64;
            let dev: Vec<f64> = col.iter().map(|x| (x - mu) * (x - mu)).collect();
            let sd = (pairwise_sum(&dev) / m as f64).sqrt();
            center[j] = mu;
            if sd > 1e-12 * (1.0 + mu.abs()) {
                scale[j] = sd;
                active.push(j);
            }
        }
        let terms = match kind {
            BasisKind::Polynomial { degree } => Terms::Monomials(monomials(active.len(), degree)),
            BasisKind::PiecewiseConstant { bins } => {
                if bins == 0 {
                    return Err(Error::MalformedInput("piecewise basis needs bins >= 1".into()));
                }
                let proto = FeatureMap {
                    center: center.clone(),
                    scale: scale.clone(),
                    active: active.clone(),
                    terms: Terms::Cells {
                        bins,
                        cells: Vec::new(),
                    },
                };
                let mut cells: Vec<usize> = (0..m).map(|p| proto.cell(&states[p * d..(p + 1) * d], bins)).collect();
                cells.sort_unstable();
                cells.dedup();
                // The lowest occupied cell is absorbed by the constant.
                cells.remove(0);
                Terms::Cells { bins, cells }
            }
        };
        Ok(FeatureMap {
            center,
            scale,
            active,
            terms,
        })
    }

    pub fn len(&self) -> usize {
        match &self.terms {
            Terms::Monomials(t) => t.len(),
            Terms::Cells { cells, .. } => cells.len() + 1,
        }
    }

    fn cell(&self, x: &[f64], bins: usize) -> usize {
        let mut idx = 0;
        let mut mult = 1;
        for &j in &self.active {
            let u = (x[j] - self.center[j]) / self.scale[j];
            let pos = ((u + EDGE) / (2.0 * EDGE) * bins as f64).floor();
            let b = pos.clamp(0.0, (bins - 1) as f64) as usize;
            idx += b * mult;
            mult *= bins;
        }
        idx
    }

    /// Writes the feature vector of state `x` into `out` (`out.len() == self.len()`).
    pub fn features(&self, x: &[f64], out: &mut [f64]) {
        match &self.terms {
            Terms::Monomials(terms) => {
                let mut u = [0.0f64; 16];
                let mut heap;
                let u: &mut [f64] = if self.active.len() <= 16 {
                    &mut u[..self.active.len()]
                } else {
                    heap = vec![0.0; self.active.len()];
                    &mut heap
                };
                for (slot, &j) in u.iter_mut().zip(&self.active) {
                    *slot = (x[j] - self.center[j]) / self.scale[j];
                }
                for (o, exps) in out.iter_mut().zip(terms) {
                    let mut v = 1.0;
                    for (ui, &e) in u.iter().zip(exps) {
                        v *= ui.powi(e as i32);
                    }
                    *o = v;
                }
            }
            Terms::Cells { bins, cells } => {
                out.fill(0.0);
                out[0] = 1.0;
                let c = self.cell(x, *bins);
                if let Ok(pos) = cells.binary_search(&c) {
                    out[pos + 1] = 1.0;
                }
            }
        }
    }
}

fn monomials(vars: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut cur = vec![0u32; vars];
        push_compositions(&mut out, &mut cur, 0, total as u32);
    }
    if vars == 0 {
        out.truncate(1);
    }
    out
}

fn push_compositions(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, at: usize, left: u32) {
    if at + 1 >= cur.len() {
        if let Some(last) = cur.last_mut() {
            *last = left;
        } else if left > 0 {
            return;
        }
        out.push(cur.clone());
        return;
    }
    for e in (0..=left).rev() {
        cur[at] = e;
        push_compositions(out, cur, at + 1, left - e);
    }
    cur[at] = 0;
}

/// Coefficients of a projection, evaluable at new states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    map: FeatureMap,
    /// `outputs × features`, row-major.
    coeffs: Vec<f64>,
    outputs: usize,
    pub ridge_used: bool,
}

impl RegressionFit {
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn feature_count(&self) -> usize {
        self.map.len()
    }

    pub fn predict(&self, x: &[f64], out: &mut [f64]) {
        let p = self.map.len();
        let mut phi = vec![0.0; p];
        self.map.features(x, &mut phi);
        for (q, o) in out.iter_mut().enumerate().take(self.outputs) {
            *o = crate::numeric::dot(&self.coeffs[q * p..(q + 1) * p], &phi);
        }
    }
}

/// Design matrix at one time index with its factorized normal equations.
pub struct Design {
    map: FeatureMap,
    /// `M × p`, row-major.
    features: Vec<f64>,
    chol: Vec<f64>,
    p: usize,
    m: usize,
    ridge: f64,
    ridge_used: bool,
}

impl Design {
    /// Builds the design from path-major states (`M × d`).
    pub fn new(states: &[f64], d: usize, basis: &RegressionBasis) -> Result<Design> {
        let m = states.len() / d;
        if m == 0 {
            return Err(Error::MalformedInput("regression on an empty sample".into()));
        }
        let map = FeatureMap::fit(states, d, basis.kind)?;
        let p = map.len();
        let mut features = vec![0.0; m * p];
        features
            .par_chunks_mut(p)
            .zip(states.par_chunks(d))
            .for_each(|(row, x)| map.features(x, row));

        let gram = chunked_reduce(m, p * p, |range, acc| {
            for r in range {
                let row = &features[r * p..(r + 1) * p];
                for a in 0..p {
                    let ra = row[a];
                    for b in 0..=a {
                        acc[a * p + b] += ra * row[b];
                    }
                }
            }
        });
        let mut g = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..=a {
                let v = gram[a * p + b] / m as f64;
                g[a * p + b] = v;
                g[b * p + a] = v;
            }
        }
        let (chol, ridge_used) = match cholesky(&g, p) {
            Some(l) => (l, false),
            None => {
                for a in 0..p {
                    g[a * p + a] += basis.ridge;
                }
                let l = cholesky(&g, p).ok_or_else(|| {
                    Error::MalformedInput("regression design is not positive definite even with ridge".into())
                })?;
                (l, true)
            }
        };
        Ok(Design {
            map,
            features,
            chol,
            p,
            m,
            ridge: basis.ridge,
            ridge_used,
        })
    }

    pub fn path_count(&self) -> usize {
        self.m
    }

    pub fn ridge_used(&self) -> bool {
        self.ridge_used
    }

    /// Projects `outputs` value columns (output-major, `outputs × M`).
    /// Returns the fit and the fitted values in the same layout.
    pub fn fit(&self, values: &[f64], outputs: usize) -> (RegressionFit, Vec<f64>) {
        let (m, p) = (self.m, self.p);
        debug_assert_eq!(values.len(), outputs * m);
        let mut coeffs = vec![0.0; outputs * p];
        let mut fitted = vec![0.0; outputs * m];
        for q in 0..outputs {
            let v = &values[q * m..(q + 1) * m];
            let rhs = self.xt_times(v);
            let mut c = self.solve(&rhs);
            // One step of iterative refinement.
            let resid: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|r| v[r] - crate::numeric::dot(&self.features[r * p..(r + 1) * p], &c))
                .collect();
            let mut rhs2 = self.xt_times(&resid);
            if self.ridge_used {
                for (r2, ci) in rhs2.iter_mut().zip(&c) {
                    *r2 -= self.ridge * ci;
                }
            }
            let corr = self.solve(&rhs2);
            for (ci, di) in c.iter_mut().zip(&corr) {
                *ci += di;
            }
            let out = &mut fitted[q * m..(q + 1) * m];
            out.par_iter_mut().enumerate().for_each(|(r, o)| {
                *o = crate::numeric::dot(&self.features[r * p..(r + 1) * p], &c);
            });
            coeffs[q * p..(q + 1) * p].copy_from_slice(&c);
        }
        (
            RegressionFit {
                map: self.map.clone(),
                coeffs,
                outputs,
                ridge_used: self.ridge_used,
            },
            fitted,
        )
    }

    fn xt_times(&self, v: &[f64]) -> Vec<f64> {
        let p = self.p;
        let sums = chunked_reduce(self.m, p, |range, acc| {
            for r in range {
                let row = &self.features[r * p..(r + 1) * p];
                for a in 0..p {
                    acc[a] += row[a] * v[r];
                }
            }
        });
        sums.into_iter().map(|s| s / self.m as f64).collect()
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let p = self.p;
        let l = &self.chol;
        let mut y = vec![0.0; p];
        for i in 0..p {
            let mut s = rhs[i];
            for j in 0..i {
                s -= l[i * p + j] * y[j];
            }
            y[i] = s / l[i * p + i];
        }
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = y[i];
            for j in i + 1..p {
                s -= l[j * p + i] * x[j];
            }
            x[i] = s / l[i * p + i];
        }
        x
    }
}

fn cholesky(g: &[f64], p: usize) -> Option<Vec<f64>> {
    let max_diag = (0..p).map(|i| g[i * p + i]).fold(0.0, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = g[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > PIVOT_RTOL * max_diag) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Sums per-chunk accumulators over `0..len` with a fixed chunking and a
/// pairwise combination order, independent of the thread count.
fn chunked_reduce<F>(len: usize, width: usize, body: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
{
    let chunks = len.div_ceil(CHUNK).max(1);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            body(c * CHUNK..((c + 1) * CHUNK).min(len), &mut acc);
            acc
        })
        .collect();
    tree_combine(&parts)
}

fn tree_combine(parts: &[Vec<f64>]) -> Vec<f64> {
    if parts.len() == 1 {
        return parts[0].clone();
    }
    let mid = parts.len() / 2;
    let mut a = tree_combine(&parts[..mid]);
    let b = tree_combine(&parts[mid..]);
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Projection of per-path values at one time index.
#[derive(Clone, Debug)]
pub struct ConditionalExpectation {
    pub fitted: Vec<f64>,
    pub fit: RegressionFit,
}

/// `E[values | F_{t_i}]` by least squares on functions of `B_{t_i}`.
pub fn conditional_expectation(
    values: &[f64],
    bundle: &PathBundle,
    time_index: usize,
    basis: &RegressionBasis,
) -> Result<ConditionalExpectation> {
    if values.len() != bundle.path_count() {
        return Err(Error::MalformedInput(format!(
            "{} values for {} paths",
            values.len(),
            bundle.path_count()
        )));
    }
    if time_index >= bundle.steps() {
        return Err(Error::MalformedInput(format!(
            "time index {time_index} is not below N = {}",
            bundle.steps()
        )));
    }
    let bad: Vec<(usize, usize)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(p, _)| (time_index, p))
        .collect();
    if !bad.is_empty() {
        return Err(Error::contamination("regression values", bad));
    }
    let design = Design::new(bundle.states_at(time_index), bundle.dims().d, basis)?;
    let (fit, fitted) = design.fit(values, 1);
    Ok(ConditionalExpectation { fitted, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{simulate_paths, TimeGrid};
    use crate::types::Dimensions;

    fn bundle(m: usize, d: usize) -> PathBundle {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        simulate_paths(&grid, Dimensions::new(1, d).unwrap(), m, 17).unwrap()
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(3, 2).len(), 10);
        assert_eq!(monomials(0, 3), vec![Vec::<u32>::new()]);
    }

    #[test]
    fn constant_values_are_reproduced_exactly() {
        let b = bundle(2000, 2);
        let vals = vec![7.0; 2000];
        for basis in [RegressionBasis::polynomial(3), RegressionBasis::piecewise_constant(6)] {
            let ce = conditional_expectation(&vals, &b, 5, &basis).unwrap();
            assert!(ce.fitted.iter().all(|v| (v - 7.0).abs() < 1e-12));
        }
    }

    #[test]
    fn initial_time_gives_sample_mean() {
        let b = bundle(500, 1);
        let vals: Vec<f64> = (0..500).map(|p| b.state(10, p)[0].powi(2)).collect();
        let ce = conditional_expectation(&vals, &b, 0, &RegressionBasis::default()).unwrap();
        let m = crate::numeric::mean(&vals);
        assert!(ce.fitted.iter().all(|v| (v - m).abs() < 1e-12));
        assert_eq!(ce.fit.feature_count(), 1);
    }

    #[test]
    fn duplicate_states_trigger_ridge_flag() {
        // Two distinct states cannot support a cubic.
        let states: Vec<f64> = (0..100).map(|p| if p % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let design = Design::new(&states, 1, &RegressionBasis::polynomial(3)).unwrap();
        assert!(design.ridge_used());
        let vals: Vec<f64> = states.iter().map(|x| 2.0 * x + 1.0).collect();
        let (_, fitted) = design.fit(&vals, 1);
        for (f, v) in fitted.iter().zip(&vals) {
            assert!((f - v).abs() < 1e-6);
        }
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let b = bundle(10, 1);
        let mut vals = vec![1.0; 10];
        vals[3] = f64::NAN;
        match conditional_expectation(&vals, &b, 2, &RegressionBasis::default()) {
            Err(Error::NumericContamination { first, .. }) => assert_eq!(first, vec![(2, 3)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fit_predicts_its_own_fitted_values() {
        let b = bundle(1000, 2);
        let vals: Vec<f64> = (0..1000).map(|p| b.state(10, p)[0] * b.state(10, p)[1]).collect();
        let ce = conditional_expectation(&vals, &b, 4, &RegressionBasis::default()).unwrap();
        let mut out = [0.0];
        for p in (0..1000).step_by(97) {
            ce.fit.predict(b.state(4, p), &mut out);
            assert!((out[0] - ce.fitted[p]).abs() < 1e-12);
        }
    }
}
