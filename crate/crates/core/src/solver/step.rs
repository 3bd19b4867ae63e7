//! The implicit-in-`y` step `y = c + ∫_{t0}^{t1} g(s, y, z) ds`.

use serde::{Deserialize, Serialize};

use crate::generator::Generator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerConfig {
    pub max_iterations: usize,
    pub damping: f64,
    /// Relative step size at which the fixed-point iteration stops.
    pub tolerance: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig {
            max_iterations: 50,
            damping: 0.5,
            tolerance: 1e-13,
        }
    }
}

pub(crate) struct StepArgs<'a> {
    pub t0: f64,
    pub t1: f64,
    pub continuation: &'a [f64],
    pub z: &'a [f64],
    pub b: &'a [f64],
}

/// Residual `y − c − inc(y)`.
fn residual(g: &dyn Generator, a: &StepArgs<'_>, y: &[f64], inc: &mut [f64], out: &mut [f64]) {
    g.step_increment(a.t0, a.t1, y, a.z, a.b, inc);
    for j in 0..y.len() {
        out[j] = y[j] - a.continuation[j] - inc[j];
    }
}

fn small(r: &[f64], y: &[f64], c: &[f64], tol: f64) -> bool {
    r.iter()
        .zip(y)
        .zip(c)
        .all(|((r, y), c)| r.abs() <= tol * (1.0 + y.abs() + c.abs()))
}

/// Solves the step for one path, writing the root into `y`.
/// Returns `false` when neither the damped iteration nor the bisection
/// fallback reaches a root.
pub(crate) fn solve_step(g: &dyn Generator, a: &StepArgs<'_>, cfg: &InnerConfig, y: &mut [f64]) -> bool {
    let k = y.len();
    let mut inc = vec![0.0; k];
    let mut res = vec![0.0; k];

    // Explicit start.
    g.step_increment(a.t0, a.t1, a.continuation, a.z, a.b, &mut inc);
    for j in 0..k {
        y[j] = a.continuation[j] + inc[j];
    }
    if y.iter().all(|v| v.is_finite()) {
        let mut next = vec![0.0; k];
        for _ in 0..cfg.max_iterations {
            g.step_increment(a.t0, a.t1, y, a.z, a.b, &mut inc);
            let mut change = 0.0f64;
            for j in 0..k {
                next[j] = (1.0 - cfg.damping) * y[j] + cfg.damping * (a.continuation[j] + inc[j]);
                change = change.max((next[j] - y[j]).abs() / (1.0 + y[j].abs()));
            }
            if !next.iter().all(|v| v.is_finite()) {
                break;
            }
            y.copy_from_slice(&next);
            if change <= cfg.tolerance {
                residual(g, a, y, &mut inc, &mut res);
                if small(&res, y, a.continuation, 1e-10) {
                    return true;
                }
            }
        }
    }

    // Componentwise bisection (nonlinear Gauss–Seidel), valid when each
    // residual component is increasing in its own coordinate.
    y.copy_from_slice(a.continuation);
    for _sweep in 0..50 {
        for j in 0..k {
            if !bisect_component(g, a, y, j, &mut inc, &mut res) {
                return false;
            }
        }
        residual(g, a, y, &mut inc, &mut res);
        if res.iter().all(|r| r.is_finite()) && small(&res, y, a.continuation, 1e-10) {
            return true;
        }
        if k == 1 {
            // A bracketed scalar root at machine resolution is final even
            // when the residual is dominated by a steep generator.
            return y[0].is_finite();
        }
    }
    false
}

fn bisect_component(
    g: &dyn Generator,
    a: &StepArgs<'_>,
    y: &mut [f64],
    j: usize,
    inc: &mut [f64],
    res: &mut [f64],
) -> bool {
    let eval = |v: f64, y: &mut [f64], inc: &mut [f64], res: &mut [f64]| -> f64 {
        y[j] = v;
        residual(g, a, y, inc, res);
        res[j]
    };
    let start = y[j];
    let f0 = eval(start, y, inc, res);
    if f0 == 0.0 {
        y[j] = start;
        return true;
    }
    // Expand away from the start in the direction that lowers |F|.
    let dir = if f0 > 0.0 { -1.0 } else { 1.0 };
    let mut step = 1e-3 * (1.0 + start.abs());
    let (mut lo, mut hi);
    let mut other = start;
    let mut found = false;
    for _ in 0..200 {
        other = start + dir * step;
        let f = eval(other, y, inc, res);
        if f.is_nan() {
            step *= 0.5;
            continue;
        }
        if (f > 0.0) != (f0 > 0.0) || f == 0.0 {
            found = true;
            break;
        }
        step *= 2.0;
        if !other.is_finite() {
            break;
        }
    }
    if !found {
        y[j] = start;
        return false;
    }
    if start < other {
        lo = start;
        hi = other;
    } else {
        lo = other;
        hi = start;
    }
    let f_lo_positive = eval(lo, y, inc, res) > 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = eval(mid, y, inc, res);
        if f == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f.is_nan() {
            return false;
        }
        if (f > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    y[j] = 0.5 * (lo + hi);
    true
}
