use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use bsde_core::catalog::{self, CatalogEntry, OracleErrors, DECLARED_OVERRIDES};
use bsde_core::conditions::{check_h4, Assumption, ConditionReport, Verdict};
use bsde_core::inequalities::{bihari_bound, divergence_test, gronwall_bound, Divergence};
use bsde_core::norms::{class_d_diagnostic, estimate_norms, NormEstimates, TailEstimate};
use bsde_core::solver::{
    picard_solve, solve_l1, write_field_csv, write_summary_csv, write_trace_csv, LadderDiagnostics, TraceEntry,
};
use bsde_core::stability::{run_stability, run_stability_s1m1, write_stability_csv, StabilityReport};
use bsde_core::{simulate_paths, BSDEProblem, PathBundle, TimeGrid};
use serde::Serialize;

use crate::config::{RunConfig, StabilityVariant};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGENCE: u8 = 3;
pub const EXIT_CHECK: u8 = 4;
pub const EXIT_VERDICT: u8 = 5;

pub struct Ctx {
    pub timing: bool,
}

/// Maps an error chain to the process exit code.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    use bsde_core::Error as E;
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<E>() {
            return match core {
                E::Io(_) => EXIT_IO,
                E::SolverDivergence { .. } | E::PicardDivergence { .. } | E::NumericContamination { .. } => {
                    EXIT_DIVERGENCE
                }
                _ => EXIT_CONFIG,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_CONFIG
}

pub fn load(path: Option<PathBuf>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let text = match &path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let cfg = RunConfig::load(&text, overrides);
    match path {
        Some(p) => cfg.with_context(|| format!("in {}", p.display())),
        None => cfg,
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'static str,
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_seconds: Option<f64>,
    config: &'a RunConfig,
    result: T,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
    started: Instant,
    timing: bool,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig, command: &'static str, ctx: &Ctx) -> Self {
        Run {
            cfg,
            command,
            started: Instant::now(),
            timing: ctx.timing,
        }
    }

    /// Writes the JSON report to `output.json`, or to stdout without one.
    fn report<T: Serialize>(&self, result: T) -> anyhow::Result<()> {
        let env = Envelope {
            version: bsde_core::VERSION,
            command: self.command,
            seed: self.cfg.numerics.seed,
            wall_seconds: self.timing.then(|| self.started.elapsed().as_secs_f64()),
            config: self.cfg,
            result,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        match &self.cfg.output.json {
            Some(p) => write_file(p, text.as_bytes()),
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_with(path: &Option<PathBuf>, f: impl FnOnce(&mut Vec<u8>) -> bsde_core::Result<()>) -> anyhow::Result<()> {
    if let Some(p) = path {
        let mut buf = Vec::new();
        f(&mut buf)?;
        write_file(p, &buf)?;
    }
    Ok(())
}

fn setup(cfg: &RunConfig) -> anyhow::Result<(catalog::Built, BSDEProblem, PathBundle)> {
    let built = cfg.built()?;
    let problem = cfg.problem(&built)?;
    let s = &cfg.numerics.solver;
    let grid = TimeGrid::uniform(problem.horizon, s.steps).context("time grid")?;
    let bundle = simulate_paths(&grid, problem.dims, s.paths, cfg.numerics.seed)?;
    Ok((built, problem, bundle))
}

fn solver_config(cfg: &RunConfig, ctx: &Ctx) -> bsde_core::solver::SolveConfig {
    let mut s = cfg.numerics.solver.clone();
    s.record_timing |= ctx.timing;
    s
}

#[derive(Serialize)]
struct SolveReport {
    generator: String,
    y0: Vec<f64>,
    window_length: f64,
    c_split: f64,
    subintervals: usize,
    step_exceeds_window: bool,
    picard_iterations: usize,
    converged: Vec<bool>,
    norms: NormEstimates,
    class_d: Vec<TailEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_error_y0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_error_z: Option<f64>,
    trace: Vec<TraceEntry>,
}

pub fn solve(cfg: &RunConfig, ctx: &Ctx) -> anyhow::Result<u8> {
    let run = Run::new(cfg, "solve", ctx);
    let (built, problem, bundle) = setup(cfg)?;
    let solver = solver_config(cfg, ctx);
    let (field, trace) = match picard_solve(&problem, &solver, &bundle) {
        Ok(v) => v,
        Err(bsde_core::Error::PicardDivergence { subinterval, trace }) => {
            write_with(&cfg.output.trace_csv, |w| write_trace_csv(&trace, w))?;
            return Err(bsde_core::Error::PicardDivergence { subinterval, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_with(&cfg.output.csv, |w| write_summary_csv(&field, w))?;
    write_with(&cfg.output.field_csv, |w| write_field_csv(&field, w))?;
    write_with(&cfg.output.trace_csv, |w| write_trace_csv(&trace, w))?;

    let oracle: Option<OracleErrors> = match &built.oracle {
        Some(o) => match o.errors(&problem.terminal, &field, &bundle) {
            Ok(e) => Some(e),
            Err(bsde_core::Error::Precondition(_)) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    let k = problem.dims.k;
    let m = field.path_count();
    let y0 = (0..k)
        .map(|j| bsde_core::numeric::mean(&(0..m).map(|p| field.y(0, p)[j]).collect::<Vec<_>>()))
        .collect();
    let report = SolveReport {
        generator: problem.generator.name(),
        y0,
        window_length: trace.window_length,
        c_split: trace.c_split,
        subintervals: trace.windows.len(),
        step_exceeds_window: trace.step_exceeds_window,
        picard_iterations: trace.iterations(),
        converged: trace.converged.clone(),
        norms: estimate_norms(&field, &cfg.experiment.betas)?,
        class_d: class_d_diagnostic(&field, &cfg.experiment.thresholds)?,
        oracle_error_y0: oracle.map(|o| o.y0),
        oracle_error_z: oracle.map(|o| o.z_mean_abs),
        trace: trace.entries,
    };
    run.report(report)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CheckSummary {
    verdict: Verdict,
    reports: Vec<ConditionReport>,
}

pub fn check(cfg: &RunConfig, ctx: &Ctx) -> anyhow::Result<u8> {
    let run = Run::new(cfg, "check", ctx);
    let names = &cfg.experiment.assumptions;
    if names.is_empty() {
        bail!("experiment.assumptions is empty; name at least one of H1, H2, H3, H1a, H1b, H4, A1, A2, A3");
    }
    let assumptions = names
        .iter()
        .map(|n| Assumption::parse(n).ok_or_else(|| anyhow!("experiment.assumptions: unknown assumption `{n}`")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let built = cfg.built()?;
    let sampler = cfg.sampler();
    let mut reports = Vec::new();
    for a in assumptions {
        let report = if a == Assumption::H4 {
            let (_, problem, bundle) = setup(cfg)?;
            check_h4(&problem, &bundle)
        } else {
            catalog::run_check(
                &built.generator,
                a,
                Some(cfg.experiment.p),
                &cfg.experiment.a_params,
                &sampler,
            )
        }
        .with_context(|| format!("checking {a}"))?;
        reports.push(report);
    }
    let verdict = reports.iter().map(|r| r.verdict).fold(Verdict::Pass, Verdict::combine);
    if let Some(p) = &cfg.output.text {
        let text: Vec<String> = reports.iter().map(ConditionReport::to_text).collect();
        write_file(p, text.join("\n").as_bytes())?;
    }
    write_with(&cfg.output.csv, |w| {
        writeln!(w, "assumption,check,verdict,samples,skipped,worst_slack")?;
        for r in &reports {
            for c in &r.checks {
                let slack = c
                    .worst
                    .as_ref()
                    .map(|w| format!("{:.16e}", w.slack))
                    .unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{slack}",
                    r.assumption, c.name, c.verdict, c.samples, c.skipped
                )?;
            }
        }
        Ok(())
    })?;
    run.report(CheckSummary { verdict, reports })?;
    Ok(if verdict == Verdict::Pass { EXIT_OK } else { EXIT_CHECK })
}

pub fn stability(cfg: &RunConfig, ctx: &Ctx) -> anyhow::Result<u8> {
    let run = Run::new(cfg, "stability", ctx);
    let (_, problem, bundle) = setup(cfg)?;
    let family = cfg
        .experiment
        .family
        .build(&problem, &cfg.experiment.ms)
        .context("experiment.family")?;
    let solver = solver_config(cfg, ctx);
    let sampler = cfg.sampler();
    let report: StabilityReport = match cfg.experiment.variant {
        StabilityVariant::L1 => run_stability(&family, &solver, &bundle, &sampler)?,
        StabilityVariant::S1m1 => run_stability_s1m1(&family, &solver, &bundle, &sampler)?,
    };
    write_with(&cfg.output.csv, |w| write_stability_csv(&report, w))?;
    let pass = report.pass;
    run.report(report)?;
    Ok(if pass { EXIT_OK } else { EXIT_VERDICT })
}

#[derive(Serialize)]
struct TruncationReport {
    #[serde(flatten)]
    ladder: LadderDiagnostics,
    /// Each step distance is within two standard errors of the terminal tail
    /// beyond the coarser level.
    within_tail_bound: Vec<bool>,
    pass: bool,
}

pub fn truncate_study(cfg: &RunConfig, ctx: &Ctx) -> anyhow::Result<u8> {
    let run = Run::new(cfg, "truncate-study", ctx);
    let (_, problem, bundle) = setup(cfg)?;
    let solver = solver_config(cfg, ctx);
    let (_, ladder) = solve_l1(&problem, &solver, &bundle, &cfg.numerics.truncation_ladder)?;
    let within: Vec<bool> = ladder
        .steps
        .iter()
        .zip(&ladder.levels)
        .map(|(s, lvl)| {
            let d = s.sup_mean_abs_dy;
            let t = lvl.terminal_tail;
            d.value <= t.value + 2.0 * (d.std_error * d.std_error + t.std_error * t.std_error).sqrt()
        })
        .collect();
    write_with(&cfg.output.csv, |w| {
        writeln!(w, "from,to,sup_mean_abs_dy,std_error,tail_from,tail_std_error")?;
        for (s, lvl) in ladder.steps.iter().zip(&ladder.levels) {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                s.from,
                s.to,
                s.sup_mean_abs_dy.value,
                s.sup_mean_abs_dy.std_error,
                lvl.terminal_tail.value,
                lvl.terminal_tail.std_error
            )?;
        }
        Ok(())
    })?;
    let pass = ladder.nonincreasing && within.iter().all(|b| *b);
    run.report(TruncationReport {
        ladder,
        within_tail_bound: within,
        pass,
    })?;
    Ok(if pass { EXIT_OK } else { EXIT_VERDICT })
}

#[derive(Serialize)]
struct BihariReport {
    bihari_bound: f64,
    /// Gronwall bound with the linear-growth constant of `rho`.
    gronwall_bound: f64,
    linear_constant: f64,
    divergence: Divergence,
}

pub fn bihari(cfg: &RunConfig, ctx: &Ctx) -> anyhow::Result<u8> {
    let run = Run::new(cfg, "bihari", ctx);
    let b = &cfg.experiment.bihari;
    b.rho.validate().map_err(|e| anyhow!("experiment.bihari.rho: {e}"))?;
    let a = b.rho.linear_constant();
    let report = BihariReport {
        bihari_bound: bihari_bound(b.u0, &b.rho, b.tau)?,
        gronwall_bound: gronwall_bound(b.u0, a, b.tau)?,
        linear_constant: a,
        divergence: divergence_test(&b.rho, b.pbar)?,
    };
    run.report(report)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Listing {
    version: &'static str,
    /// Parameters every entry accepts, replacing a declared constant.
    declared_overrides: [&'static str; 2],
    generators: Vec<CatalogEntry>,
}

pub fn list_generators() -> anyhow::Result<u8> {
    let listing = Listing {
        version: bsde_core::VERSION,
        declared_overrides: DECLARED_OVERRIDES,
        generators: catalog::catalog(),
    };
    let mut text = serde_json::to_string_pretty(&listing)?;
    text.push('\n');
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

pub fn show_config(cfg: &RunConfig) -> anyhow::Result<u8> {
    std::io::stdout().write_all(cfg.to_toml().as_bytes())?;
    Ok(EXIT_OK)
}
