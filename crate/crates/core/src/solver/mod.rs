//! Backward regression scheme, Picard iteration with time splitting and the
//! truncation ladder.

mod export;
mod metrics;
mod step;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{write_field_csv, write_summary_csv, write_trace_csv};
pub use metrics::{field_distance, field_distance_window, FieldDistance};
pub use step::InnerConfig;

use crate::error::{Error, Result};
use crate::generator::{Declared, Generator, TruncatedGenerator};
use crate::numeric::{mean_estimate, norm, Estimate};
use crate::stochastic::{Design, PathBundle, RegressionBasis};
use crate::types::{BSDEProblem, SolutionField, TerminalSpec};
use step::{solve_step, StepArgs};

const MAX_SUBINTERVALS: usize = 10_000;
const STOP_BETA: f64 = 0.5;

/// Level `n` of the radial truncation `q_n(x) = x n / max(n, |x|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationLevel {
    pub n: f64,
}

impl TruncationLevel {
    pub fn new(n: f64) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::Configuration(format!(
                "truncation level must be at least 1, got {n}"
            )));
        }
        Ok(TruncationLevel { n })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub max_iterations: usize,
    /// Stop once `E sup|Δy|^{1/2} + E(∫|Δz|²)^{1/4}` falls below this.
    pub tolerance: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            max_iterations: 50,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Grid steps `N`.
    pub steps: usize,
    /// Path count `M`.
    pub paths: usize,
    pub basis: RegressionBasis,
    pub picard: PicardConfig,
    /// Constant in the window length; `None` means `2(A + λ + λ²)`.
    pub c_split: Option<f64>,
    pub inner: InnerConfig,
    /// Every entry of the starting `z⁰`.
    pub initial_z: f64,
    /// Store elapsed seconds in the trace (makes output run-dependent).
    pub record_timing: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            steps: 100,
            paths: 10_000,
            basis: RegressionBasis::default(),
            picard: PicardConfig::default(),
            c_split: None,
            inner: InnerConfig::default(),
            initial_z: 0.0,
            record_timing: false,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if self.steps == 0 {
            return bad("numerics.steps must be positive".into());
        }
        if self.paths < 2 {
            return bad(format!("numerics.paths must be at least 2, got {}", self.paths));
        }
        if self.picard.max_iterations == 0 {
            return bad("picard.max_iterations must be positive".into());
        }
        if !(self.picard.tolerance > 0.0) {
            return bad(format!(
                "picard.tolerance must be positive, got {}",
                self.picard.tolerance
            ));
        }
        if let Some(c) = self.c_split {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("c_split must be positive, got {c}"));
            }
        }
        if !(self.inner.damping > 0.0 && self.inner.damping <= 1.0) {
            return bad(format!("inner.damping must lie in (0, 1], got {}", self.inner.damping));
        }
        if self.inner.max_iterations == 0 || !(self.inner.tolerance > 0.0) {
            return bad("inner.max_iterations and inner.tolerance must be positive".into());
        }
        if !self.basis.ridge.is_finite() || self.basis.ridge <= 0.0 {
            return bad(format!("basis.ridge must be positive, got {}", self.basis.ridge));
        }
        if !self.initial_z.is_finite() {
            return bad("initial_z must be finite".into());
        }
        Ok(())
    }

    pub fn default_c_split(declared: &Declared) -> f64 {
        let a = declared.rho.linear_constant();
        let l = declared.lambda;
        2.0 * (a + l + l * l)
    }
}

/// The admissible window length for the Picard iteration.
///
/// `min{ln2/C, 1/(16λ²), ln2/(2A)}` when `α < 1/2`; for `α ≥ 1/2` the middle
/// term becomes `(1/(16 λ^q))^{2/q}` with `q` the midpoint of `(1, p̄ ∧ 1/α)`.
pub fn window_length(declared: &Declared, c_split: f64) -> Result<f64> {
    let ln2 = std::f64::consts::LN_2;
    let a = declared.rho.linear_constant();
    let l = declared.lambda;
    let by_c = ln2 / c_split;
    let by_a = if a > 0.0 { ln2 / (2.0 * a) } else { f64::INFINITY };
    let by_lambda = if declared.alpha < 0.5 {
        if l > 0.0 {
            1.0 / (16.0 * l * l)
        } else {
            f64::INFINITY
        }
    } else {
        let pbar = declared
            .pbar
            .ok_or_else(|| Error::Configuration("alpha >= 1/2 requires a declared pbar > 1".into()))?;
        let q = 0.5 * (1.0 + pbar.min(1.0 / declared.alpha));
        if l > 0.0 {
            (1.0 / (16.0 * l.powf(q))).powf(2.0 / q)
        } else {
            f64::INFINITY
        }
    };
    Ok(by_c.min(by_lambda).min(by_a))
}

/// Splits the grid into windows of length at most `delta`, from the horizon
/// backwards. Returns `(lo, hi)` index pairs and whether some single step is
/// longer than `delta`.
pub fn split_grid(times: &[f64], delta: f64) -> (Vec<(usize, usize)>, bool) {
    let mut out = Vec::new();
    let mut too_long = false;
    let mut hi = times.len() - 1;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 && times[hi] - times[lo - 1] <= delta * (1.0 + 1e-12) {
            lo -= 1;
        }
        if lo == hi {
            lo = hi - 1;
            too_long = true;
        }
        out.push((lo, hi));
        hi = lo;
    }
    (out, too_long)
}

/// `ξ^n = q_n(ξ)` and `g^n = g − g(·, 0, ·) + q_n(g(·, 0, ·))`.
pub fn truncate_problem(problem: &BSDEProblem, level: TruncationLevel) -> Result<BSDEProblem> {
    BSDEProblem::new(
        TerminalSpec::Truncated {
            n: level.n,
            inner: Box::new(problem.terminal.clone()),
        },
        problem.horizon,
        TruncatedGenerator::wrap(problem.generator.clone(), level.n),
        problem.dims,
    )
}

fn check_bundle(problem: &BSDEProblem, config: &SolveConfig, bundle: &PathBundle) -> Result<()> {
    config.validate()?;
    if bundle.dims() != problem.dims {
        return Err(Error::Configuration(format!(
            "bundle dimensions {:?} differ from problem dimensions {:?}",
            bundle.dims(),
            problem.dims
        )));
    }
    let t = bundle.grid().horizon();
    if (t - problem.horizon).abs() > 1e-12 * problem.horizon.max(1.0) {
        return Err(Error::Configuration(format!(
            "bundle horizon {t} differs from problem horizon {}",
            problem.horizon
        )));
    }
    if bundle.steps() != config.steps || bundle.path_count() != config.paths {
        return Err(Error::Configuration(format!(
            "bundle has N = {}, M = {} but the configuration asks for N = {}, M = {}",
            bundle.steps(),
            bundle.path_count(),
            config.steps,
            config.paths
        )));
    }
    Ok(())
}

fn terminal_field(problem: &BSDEProblem, bundle: &PathBundle) -> Result<SolutionField> {
    let mut field = SolutionField::zeros(bundle.grid().clone(), problem.dims, bundle.path_count());
    let xi = problem.terminal.sample(bundle, problem.dims.k);
    let bad: Vec<(usize, usize)> = xi
        .chunks(problem.dims.k)
        .enumerate()
        .filter(|(_, v)| v.iter().any(|x| !x.is_finite()))
        .map(|(p, _)| (bundle.steps(), p))
        .collect();
    if !bad.is_empty() {
        return Err(Error::contamination("terminal condition", bad));
    }
    field.y_at_mut(bundle.steps()).copy_from_slice(&xi);
    Ok(field)
}

/// One backward pass over time indices `lo..hi`, starting from `y_hi` already
/// stored in `field`. With `frozen_z`, the generator sees that `z` instead of
/// the one being estimated.
fn backward_sweep(
    generator: &dyn Generator,
    bundle: &PathBundle,
    config: &SolveConfig,
    field: &mut SolutionField,
    lo: usize,
    hi: usize,
    frozen_z: Option<&SolutionField>,
) -> Result<()> {
    let dims = field.dims();
    let (k, d, kd) = (dims.k, dims.d, dims.kd());
    let m = bundle.path_count();
    let grid = bundle.grid().clone();
    for i in (lo..hi).rev() {
        let (t0, t1) = (grid.time(i), grid.time(i + 1));
        let dt = t1 - t0;
        let y_next = field.y_at(i + 1);
        let bad: Vec<(usize, usize)> = (0..m)
            .filter(|p| y_next[p * k..(p + 1) * k].iter().any(|v| !v.is_finite()))
            .map(|p| (i + 1, p))
            .collect();
        if !bad.is_empty() {
            return Err(Error::contamination("y before regression", bad));
        }
        let design = Design::new(bundle.states_at(i), d, &config.basis)?;
        let mut values = vec![0.0; k * m];
        for p in 0..m {
            for j in 0..k {
                values[j * m + p] = y_next[p * k + j];
            }
        }
        let (y_fit, cont) = design.fit(&values, k);
        let increments = bundle.increments_at(i);
        let mut zvals = vec![0.0; kd * m];
        for j in 0..k {
            for p in 0..m {
                let r = values[j * m + p] - cont[j * m + p];
                for c in 0..d {
                    zvals[(j * d + c) * m + p] = r * increments[p * d + c] / dt;
                }
            }
        }
        let (z_fit, zfitted) = design.fit(&zvals, kd);

        let states = bundle.states_at(i);
        let solved: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..m)
            .into_par_iter()
            .map(|p| {
                let c: Vec<f64> = (0..k).map(|j| cont[j * m + p]).collect();
                let z_est: Vec<f64> = (0..kd).map(|q| zfitted[q * m + p]).collect();
                let z_use = frozen_z.map_or(&z_est[..], |f| f.z(i, p));
                let mut y = vec![0.0; k];
                let args = StepArgs {
                    t0,
                    t1,
                    continuation: &c,
                    z: z_use,
                    b: &states[p * d..(p + 1) * d],
                };
                let ok = solve_step(generator, &args, &config.inner, &mut y) && y.iter().all(|v| v.is_finite());
                (y, z_est, ok)
            })
            .collect();
        let failed: Vec<usize> = solved
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.2)
            .map(|(p, _)| p)
            .collect();
        if !failed.is_empty() {
            return Err(Error::SolverDivergence {
                time_index: i,
                paths: failed,
            });
        }
        {
            let ys = field.y_at_mut(i);
            for (p, s) in solved.iter().enumerate() {
                ys[p * k..(p + 1) * k].copy_from_slice(&s.0);
            }
        }
        {
            let zs = field.z_at_mut(i);
            for (p, s) in solved.iter().enumerate() {
                zs[p * kd..(p + 1) * kd].copy_from_slice(&s.1);
            }
        }
        field.y_fits[i] = Some(y_fit);
        field.z_fits[i] = Some(z_fit);
    }
    let n = field.steps();
    if hi == n && n > 0 {
        let last = field.z_at(n - 1).to_vec();
        field.z_at_mut(n).copy_from_slice(&last);
    }
    Ok(())
}

/// Backward scheme for a generator that does not depend on `z`.
pub fn solve_z_free(problem: &BSDEProblem, config: &SolveConfig, bundle: &PathBundle) -> Result<SolutionField> {
    if !problem.generator.ignores_z() {
        return Err(Error::Precondition(format!(
            "generator {} depends on z; use picard_solve",
            problem.generator.name()
        )));
    }
    check_bundle(problem, config, bundle)?;
    let mut field = terminal_field(problem, bundle)?;
    backward_sweep(
        problem.generator.as_ref(),
        bundle,
        config,
        &mut field,
        0,
        bundle.steps(),
        None,
    )?;
    Ok(field)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Window index, 0 for the window ending at the horizon.
    pub subinterval: usize,
    /// `sup_t mean |y^n − y^{n−1}|` over the window.
    pub sup_mean_abs_dy: f64,
    /// `E sup |y^n − y^{n−1}|^{1/2}` over the window.
    pub e_sup_dy_half: f64,
    /// `E (∫ |z^n − z^{n−1}|² dt)^{1/4}` over the window.
    pub m_half_dz: f64,
    pub seconds: Option<f64>,
}

impl TraceEntry {
    /// The stopping metric.
    pub fn metric(&self) -> f64 {
        self.e_sup_dy_half + self.m_half_dz
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace {
    pub entries: Vec<TraceEntry>,
    pub window_length: f64,
    pub c_split: f64,
    /// `(lo, hi)` grid indices per window, in processing order.
    pub windows: Vec<(usize, usize)>,
    /// A grid step is longer than the window length, so each step is its
    /// own window.
    pub step_exceeds_window: bool,
    pub converged: Vec<bool>,
}

impl PicardTrace {
    pub fn window_entries(&self, w: usize) -> Vec<&TraceEntry> {
        self.entries.iter().filter(|e| e.subinterval == w).collect()
    }

    pub fn iterations(&self) -> usize {
        self.entries.len()
    }
}

/// Picard iteration: freeze `z^{n−1}` in the generator, solve the `z`-free
/// problem, repeat, window by window from the horizon backwards.
pub fn picard_solve(
    problem: &BSDEProblem,
    config: &SolveConfig,
    bundle: &PathBundle,
) -> Result<(SolutionField, PicardTrace)> {
    check_bundle(problem, config, bundle)?;
    let declared = problem.generator.declared();
    let c_split = config.c_split.unwrap_or_else(|| SolveConfig::default_c_split(declared));
    let delta = window_length(declared, c_split)?;
    let (windows, step_exceeds_window) = split_grid(bundle.grid().times(), delta);
    if windows.len() > MAX_SUBINTERVALS {
        return Err(Error::Configuration(format!(
            "{} subintervals exceed the limit of {MAX_SUBINTERVALS} (window length {delta})",
            windows.len()
        )));
    }
    let mut trace = PicardTrace {
        window_length: delta,
        c_split,
        windows: windows.clone(),
        step_exceeds_window,
        ..Default::default()
    };
    let start = Instant::now();
    let mut field = terminal_field(problem, bundle)?;
    let generator = problem.generator.as_ref();
    let max_iter = if generator.ignores_z() {
        1
    } else {
        config.picard.max_iterations
    };

    for (w, &(lo, hi)) in windows.iter().enumerate() {
        let mut prev = field.clone();
        for i in lo..hi {
            prev.y_at_mut(i).fill(0.0);
            prev.z_at_mut(i).fill(config.initial_z);
        }
        let mut last_metric = f64::INFINITY;
        let mut rising = 0;
        let mut converged = false;
        for n in 1..=max_iter {
            let frozen = if generator.ignores_z() { None } else { Some(&prev) };
            backward_sweep(generator, bundle, config, &mut field, lo, hi, frozen)?;
            let dist = field_distance_window(&field, &prev, &[STOP_BETA], lo, hi);
            let entry = TraceEntry {
                iteration: n,
                subinterval: w,
                sup_mean_abs_dy: dist.sup_mean_abs_dy.value,
                e_sup_dy_half: dist.e_sup_dy[0].value,
                m_half_dz: dist.m_dz[0].value,
                seconds: config.record_timing.then(|| start.elapsed().as_secs_f64()),
            };
            let metric = entry.metric();
            trace.entries.push(entry);
            if generator.ignores_z() || metric <= config.picard.tolerance {
                converged = true;
                break;
            }
            if metric > last_metric * (1.0 + 1e-9) {
                rising += 1;
                if rising >= 3 {
                    trace.converged.push(false);
                    return Err(Error::PicardDivergence {
                        subinterval: w,
                        trace: Box::new(trace),
                    });
                }
            } else {
                rising = 0;
            }
            last_metric = metric;
            for i in lo..=hi {
                prev.y_at_mut(i).copy_from_slice(field.y_at(i));
                prev.z_at_mut(i).copy_from_slice(field.z_at(i));
            }
        }
        trace.converged.push(converged);
    }
    Ok((field, trace))
}

/// Evaluates the stored regression fits of `field` on the paths of another
/// bundle: at each time the continuation value and `z` come from the fits and
/// `y` solves the implicit step with the problem's generator.
pub fn transfer_field(
    field: &SolutionField,
    problem: &BSDEProblem,
    bundle: &PathBundle,
    inner: &InnerConfig,
) -> Result<SolutionField> {
    if bundle.grid() != field.grid() || bundle.dims() != field.dims() {
        return Err(Error::Configuration(
            "transfer needs a bundle on the same grid and dimensions".into(),
        ));
    }
    let dims = field.dims();
    let (k, kd) = (dims.k, dims.kd());
    let m = bundle.path_count();
    let n = field.steps();
    let mut out = terminal_field(problem, bundle)?;
    let grid = bundle.grid().clone();
    let generator = problem.generator.as_ref();
    for i in 0..n {
        let (Some(yf), Some(zf)) = (&field.y_fits[i], &field.z_fits[i]) else {
            return Err(Error::Precondition(format!(
                "field has no regression fit at time index {i}"
            )));
        };
        let solved: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..m)
            .into_par_iter()
            .map(|p| {
                let b = bundle.state(i, p);
                let mut c = vec![0.0; k];
                let mut z = vec![0.0; kd];
                yf.predict(b, &mut c);
                zf.predict(b, &mut z);
                let mut y = vec![0.0; k];
                let args = StepArgs {
                    t0: grid.time(i),
                    t1: grid.time(i + 1),
                    continuation: &c,
                    z: &z,
                    b,
                };
                let ok = solve_step(generator, &args, inner, &mut y) && y.iter().all(|v| v.is_finite());
                (y, z, ok)
            })
            .collect();
        let failed: Vec<usize> = solved
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.2)
            .map(|(p, _)| p)
            .collect();
        if !failed.is_empty() {
            return Err(Error::SolverDivergence {
                time_index: i,
                paths: failed,
            });
        }
        let ys = out.y_at_mut(i);
        for (p, s) in solved.iter().enumerate() {
            ys[p * k..(p + 1) * k].copy_from_slice(&s.0);
        }
        let zs = out.z_at_mut(i);
        for (p, s) in solved.iter().enumerate() {
            zs[p * kd..(p + 1) * kd].copy_from_slice(&s.1);
        }
    }
    if n > 0 {
        let last = out.z_at(n - 1).to_vec();
        out.z_at_mut(n).copy_from_slice(&last);
    }
    Ok(out)
}

/// Seed of the independent bundle used by [`resolve_floor`]: the primary seed
/// plus this constant (wrapping).
pub const FLOOR_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Monte Carlo floor of the distance metrics for `field`, the solution of
/// `problem` on `bundle`.
///
/// The problem is solved again on an independent bundle with the same grid
/// and path count, its regression fits are evaluated on the primary paths, and
/// the result is compared with `field`. Rerunning on the same bundle would give
/// exactly zero, so this measures the estimation noise a consistent solver
/// leaves between two solutions of one problem.
pub fn resolve_floor(
    problem: &BSDEProblem,
    config: &SolveConfig,
    bundle: &PathBundle,
    field: &SolutionField,
    betas: &[f64],
) -> Result<FieldDistance> {
    let seed = bundle.seed().wrapping_add(FLOOR_SEED_OFFSET);
    let other = crate::stochastic::simulate_paths(bundle.grid(), bundle.dims(), bundle.path_count(), seed)?;
    let (again, _) = picard_solve(problem, config, &other)?;
    let moved = transfer_field(&again, problem, bundle, &config.inner)?;
    Ok(field_distance(&moved, field, betas))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub n: f64,
    pub picard_iterations: usize,
    /// Empirical `E[|ξ| 1{|ξ| > n}]`.
    pub terminal_tail: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub from: f64,
    pub to: f64,
    pub sup_mean_abs_dy: Estimate,
    pub e_sup_dy_half: Estimate,
    pub m_half_dz: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderDiagnostics {
    pub levels: Vec<LadderLevel>,
    pub steps: Vec<LadderStep>,
    /// Each distance sequence is nonincreasing up to two standard errors.
    pub nonincreasing: bool,
}

fn nonincreasing_within(values: &[Estimate], k_se: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1].value <= w[0].value + k_se * (w[0].std_error + w[1].std_error))
}

/// Solves the truncated problems along `ladder` and reports the distances
/// between consecutive levels. Returns the finest-level field.
pub fn solve_l1(
    problem: &BSDEProblem,
    config: &SolveConfig,
    bundle: &PathBundle,
    ladder: &[f64],
) -> Result<(SolutionField, LadderDiagnostics)> {
    if ladder.is_empty() {
        return Err(Error::Configuration("truncation ladder is empty".into()));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Configuration(
            "truncation ladder must be strictly increasing".into(),
        ));
    }
    let k = problem.dims.k;
    let xi = problem.terminal.sample(bundle, k);
    let mut levels = Vec::new();
    let mut steps = Vec::new();
    let mut prev: Option<(f64, SolutionField)> = None;
    for &n in ladder {
        let level = TruncationLevel::new(n)?;
        let (field, trace) = picard_solve(&truncate_problem(problem, level)?, config, bundle)?;
        let tail: Vec<f64> = xi
            .chunks(k)
            .map(|v| {
                let r = norm(v);
                if r > n {
                    r
                } else {
                    0.0
                }
            })
            .collect();
        levels.push(LadderLevel {
            n,
            picard_iterations: trace.iterations(),
            terminal_tail: mean_estimate(&tail),
        });
        if let Some((from, pf)) = &prev {
            let dist = field_distance(&field, pf, &[STOP_BETA]);
            steps.push(LadderStep {
                from: *from,
                to: n,
                sup_mean_abs_dy: dist.sup_mean_abs_dy,
                e_sup_dy_half: Estimate {
                    value: dist.e_sup_dy[0].value,
                    std_error: dist.e_sup_dy[0].std_error,
                },
                m_half_dz: Estimate {
                    value: dist.m_dz[0].value,
                    std_error: dist.m_dz[0].std_error,
                },
            });
        }
        prev = Some((n, field));
    }
    let nonincreasing = {
        let a: Vec<Estimate> = steps.iter().map(|s| s.sup_mean_abs_dy).collect();
        let b: Vec<Estimate> = steps.iter().map(|s| s.e_sup_dy_half).collect();
        let c: Vec<Estimate> = steps.iter().map(|s| s.m_half_dz).collect();
        nonincreasing_within(&a, 2.0) && nonincreasing_within(&b, 2.0) && nonincreasing_within(&c, 2.0)
    };
    let (_, field) = prev.expect("ladder is nonempty");
    Ok((
        field,
        LadderDiagnostics {
            levels,
            steps,
            nonincreasing,
        },
    ))
}
