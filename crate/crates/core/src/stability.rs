//! Convergence of solutions under perturbations `(ξ^m, g^m) → (ξ, g)`.
//!
//! Every problem of a family is solved on one shared bundle, so differences
//! between solutions contain no sampling noise from the paths themselves.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::conditions::{check_h4, perturbation_distance, terminal_gap, SamplerConfig, Verdict};
use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, OffsetGenerator};
use crate::numeric::Estimate;
use crate::solver::{field_distance, picard_solve, resolve_floor, FieldDistance, SolveConfig};
use crate::stochastic::PathBundle;
use crate::types::{BSDEProblem, SolutionField, TerminalSpec};

/// Exponents of the `β`-metrics.
pub const BETAS: [f64; 3] = [0.25, 0.5, 0.75];

/// One perturbed problem.
#[derive(Clone, Debug)]
pub struct Member {
    pub m: u32,
    pub terminal: TerminalSpec,
    pub generator: GeneratorSpec,
    /// Declared bound on `|g^m − g|`.
    pub a_m: f64,
}

#[derive(Clone, Debug)]
pub struct PerturbationFamily {
    pub base: BSDEProblem,
    /// Sorted by increasing `m`.
    pub members: Vec<Member>,
}

/// Generator offsets of size `1/m` in the first component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Offset {
    None,
    Constant,
    /// `(1/m) sin t`.
    Sine,
}

/// Built-in families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FamilySpec {
    /// `ξ^m = ξ`, `g^m = g`.
    Identity,
    /// `ξ^m = ξ + (1/m) e_1`, `g^m = g`.
    TerminalShift,
    /// `ξ^m = (1 + 1/m) ξ` and `g^m = g + offset`.
    ScaleOffset { offset: Offset },
}

impl FamilySpec {
    pub fn build(&self, base: &BSDEProblem, ms: &[u32]) -> Result<PerturbationFamily> {
        if ms.is_empty() || ms.contains(&0) || ms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Configuration(format!(
                "perturbation indices must be positive and strictly increasing, got {ms:?}"
            )));
        }
        let k = base.dims.k;
        let members = ms
            .iter()
            .map(|&m| {
                let eps = 1.0 / f64::from(m);
                let unit = |x: f64| {
                    let mut v = vec![0.0; k];
                    v[0] = x;
                    v
                };
                let (terminal, generator, a_m) = match self {
                    FamilySpec::Identity => (base.terminal.clone(), base.generator.clone(), 0.0),
                    FamilySpec::TerminalShift => (
                        TerminalSpec::Shifted {
                            shift: unit(eps),
                            inner: Box::new(base.terminal.clone()),
                        },
                        base.generator.clone(),
                        0.0,
                    ),
                    FamilySpec::ScaleOffset { offset } => {
                        let terminal = TerminalSpec::Scaled {
                            factor: 1.0 + eps,
                            inner: Box::new(base.terminal.clone()),
                        };
                        let (generator, a_m) = match offset {
                            Offset::None => (base.generator.clone(), 0.0),
                            Offset::Constant => (OffsetGenerator::constant(base.generator.clone(), unit(eps)), eps),
                            Offset::Sine => (OffsetGenerator::sine(base.generator.clone(), 0, eps), eps),
                        };
                        (terminal, generator, a_m)
                    }
                };
                Member {
                    m,
                    terminal,
                    generator,
                    a_m,
                }
            })
            .collect();
        Ok(PerturbationFamily {
            base: base.clone(),
            members,
        })
    }
}

/// Sampled evidence that a member satisfies the family requirements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub m: u32,
    pub a_m: f64,
    /// Empirical `sup |g^m − g|`, after a rounding allowance.
    pub generator_distance: f64,
    /// `E[sup_t E[|ξ^m − ξ| | F_t]]`, for the `S¹ × M¹` variant.
    pub terminal_gap: Option<Estimate>,
}

/// Checks that members share the base's declared constants and that the
/// sampled distance to the base generator stays within `a_m`.
pub fn certify(family: &PerturbationFamily, sampler: &SamplerConfig) -> Result<Vec<Certificate>> {
    let base = &family.base;
    let mut out = Vec::new();
    for mem in &family.members {
        if mem.generator.declared() != base.generator.declared() {
            return Err(Error::Precondition(format!(
                "member m = {} declares different constants from the base generator",
                mem.m
            )));
        }
        let d = perturbation_distance(&mem.generator, &base.generator, sampler)?;
        if d.sup_resolved > mem.a_m * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "member m = {}: sampled |g^m - g| reaches {:e}, above a_m = {:e}",
                mem.m, d.sup_resolved, mem.a_m
            )));
        }
        out.push(Certificate {
            m: mem.m,
            a_m: mem.a_m,
            generator_distance: d.sup_resolved,
            terminal_gap: None,
        });
    }
    if let (Some(first), Some(last)) = (family.members.first(), family.members.last()) {
        if family.members.len() > 1 && last.a_m > first.a_m {
            return Err(Error::Precondition("a_m must not increase along the family".into()));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub std_error: f64,
}

impl From<Estimate> for MetricValue {
    fn from(e: Estimate) -> Self {
        MetricValue {
            value: e.value,
            std_error: e.std_error,
        }
    }
}

/// Named metric values in a fixed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub names: Vec<String>,
    pub values: Vec<MetricValue>,
}

impl MetricSet {
    fn from_distance(d: &FieldDistance, with_128: bool) -> Self {
        let mut names = vec!["metric_61".to_string()];
        let mut values = vec![MetricValue::from(d.sup_mean_abs_dy)];
        for b in BETAS {
            let e = FieldDistance::at(&d.combined, b).expect("beta requested");
            names.push(format!("metric_62_b{b}"));
            values.push(MetricValue {
                value: e.value,
                std_error: e.std_error,
            });
        }
        if with_128 {
            let e = FieldDistance::at(&d.combined, 1.0).expect("beta requested");
            names.push("metric_128".into());
            values.push(MetricValue {
                value: e.value,
                std_error: e.std_error,
            });
        }
        MetricSet { names, values }
    }

    pub fn get(&self, name: &str) -> Option<MetricValue> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub m: u32,
    pub a_m: f64,
    pub metrics: Option<MetricSet>,
    /// Why the member could not be solved.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVerdict {
    pub metric: String,
    /// Each value at most the previous one plus two combined standard errors.
    pub monotone: bool,
    /// The last value at most the floor plus three combined standard errors.
    pub at_floor: bool,
}

impl MetricVerdict {
    pub fn pass(&self) -> bool {
        self.monotone && self.at_floor
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `L¹` stability: metrics 61 and 62.
    L1,
    /// `S¹ × M¹` stability: adds metric 128.
    S1M1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub variant: Variant,
    pub seed: u64,
    pub paths: usize,
    pub steps: usize,
    pub certificates: Vec<Certificate>,
    /// Distance between the base solution and its re-solve on an independent
    /// bundle.
    pub floor: MetricSet,
    pub rows: Vec<StabilityRow>,
    pub verdicts: Vec<MetricVerdict>,
    pub pass: bool,
}

fn combined_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

/// Recomputes the verdicts from stored values.
pub fn verdicts(floor: &MetricSet, rows: &[StabilityRow]) -> Vec<MetricVerdict> {
    floor
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let series: Vec<Option<MetricValue>> =
                rows.iter().map(|r| r.metrics.as_ref().map(|s| s.values[j])).collect();
            let all: Option<Vec<MetricValue>> = series.into_iter().collect();
            let (monotone, at_floor) = match all {
                None => (false, false),
                Some(v) if v.is_empty() => (true, true),
                Some(v) => {
                    let monotone = v
                        .windows(2)
                        .all(|w| w[1].value <= w[0].value + 2.0 * combined_se(w[0].std_error, w[1].std_error));
                    let last = v[v.len() - 1];
                    let f = floor.values[j];
                    let at_floor = last.value <= f.value + 3.0 * combined_se(last.std_error, f.std_error);
                    (monotone, at_floor)
                }
            };
            MetricVerdict {
                metric: name.clone(),
                monotone,
                at_floor,
            }
        })
        .collect()
}

fn all_betas(variant: &Variant) -> Vec<f64> {
    let mut b = BETAS.to_vec();
    if *variant == Variant::S1M1 {
        b.push(1.0);
    }
    b
}

fn run(
    family: &PerturbationFamily,
    config: &SolveConfig,
    bundle: &PathBundle,
    certificates: Vec<Certificate>,
    variant: Variant,
) -> Result<StabilityReport> {
    let betas = all_betas(&variant);
    let with_128 = variant == Variant::S1M1;
    let (base_field, _) = picard_solve(&family.base, config, bundle)?;
    let floor = MetricSet::from_distance(
        &resolve_floor(&family.base, config, bundle, &base_field, &betas)?,
        with_128,
    );
    let mut rows = Vec::new();
    for mem in &family.members {
        let solved: Result<SolutionField> = BSDEProblem::new(
            mem.terminal.clone(),
            family.base.horizon,
            mem.generator.clone(),
            family.base.dims,
        )
        .and_then(|p| picard_solve(&p, config, bundle).map(|(f, _)| f));
        rows.push(match solved {
            Ok(field) => StabilityRow {
                m: mem.m,
                a_m: mem.a_m,
                metrics: Some(MetricSet::from_distance(
                    &field_distance(&field, &base_field, &betas),
                    with_128,
                )),
                failure: None,
            },
            Err(e) => StabilityRow {
                m: mem.m,
                a_m: mem.a_m,
                metrics: None,
                failure: Some(e.to_string()),
            },
        });
    }
    let verdicts = verdicts(&floor, &rows);
    let pass = verdicts.iter().all(MetricVerdict::pass) && rows.iter().all(|r| r.failure.is_none());
    Ok(StabilityReport {
        variant,
        seed: bundle.seed(),
        paths: bundle.path_count(),
        steps: bundle.steps(),
        certificates,
        floor,
        rows,
        verdicts,
        pass,
    })
}

/// `L¹` stability: `sup_t E|y^m_t − y_t|` and the `β`-metrics for
/// `β ∈ {1/4, 1/2, 3/4}`.
///
/// Members whose solve fails are kept as rows with a failure note and make the
/// report fail.
pub fn run_stability(
    family: &PerturbationFamily,
    config: &SolveConfig,
    bundle: &PathBundle,
    sampler: &SamplerConfig,
) -> Result<StabilityReport> {
    let certs = certify(family, sampler)?;
    run(family, config, bundle, certs, Variant::L1)
}

/// `S¹ × M¹` stability, which adds `E sup_t |Δy_t| + E(∫|Δz|²)^{1/2}`.
///
/// Requires the integrability check to pass for the base and every member,
/// and the terminal gaps to be nonincreasing within two standard errors.
pub fn run_stability_s1m1(
    family: &PerturbationFamily,
    config: &SolveConfig,
    bundle: &PathBundle,
    sampler: &SamplerConfig,
) -> Result<StabilityReport> {
    let mut certs = certify(family, sampler)?;
    let base = &family.base;
    let problems = std::iter::once(Ok(base.clone())).chain(
        family
            .members
            .iter()
            .map(|mem| BSDEProblem::new(mem.terminal.clone(), base.horizon, mem.generator.clone(), base.dims)),
    );
    for (j, p) in problems.enumerate() {
        let report = check_h4(&p?, bundle)?;
        if report.verdict != Verdict::Pass {
            let who = if j == 0 {
                "base".to_string()
            } else {
                format!("m = {}", family.members[j - 1].m)
            };
            return Err(Error::Precondition(format!(
                "integrability check is not passed for {who}"
            )));
        }
    }
    for (c, mem) in certs.iter_mut().zip(&family.members) {
        c.terminal_gap = Some(terminal_gap(&mem.terminal, &base.terminal, base.dims.k, bundle)?);
    }
    let gaps: Vec<Estimate> = certs.iter().filter_map(|c| c.terminal_gap).collect();
    if gaps
        .windows(2)
        .any(|w| w[1].value > w[0].value + 2.0 * combined_se(w[0].std_error, w[1].std_error))
    {
        return Err(Error::Precondition(
            "terminal gaps do not decrease along the family".into(),
        ));
    }
    run(family, config, bundle, certs, Variant::S1M1)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `m,metric,value,std_error`, floor rows first with `m = floor`.
pub fn write_stability_csv<W: Write>(report: &StabilityReport, mut w: W) -> Result<()> {
    writeln!(w, "m,metric,value,std_error")?;
    for (n, v) in report.floor.names.iter().zip(&report.floor.values) {
        writeln!(w, "floor,{n},{},{}", num(v.value), num(v.std_error))?;
    }
    for r in &report.rows {
        if let Some(s) = &r.metrics {
            for (n, v) in s.names.iter().zip(&s.values) {
                writeln!(w, "{},{n},{},{}", r.m, num(v.value), num(v.std_error))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, Params};
    use crate::stochastic::{simulate_paths, TimeGrid};
    use crate::types::Dimensions;

    fn zero_problem(terminal: TerminalSpec) -> BSDEProblem {
        let g = build("zero", &Params::new()).unwrap().generator;
        BSDEProblem::new(terminal, 1.0, g, Dimensions::new(1, 1).unwrap()).unwrap()
    }

    fn setup(paths: usize) -> (SolveConfig, PathBundle) {
        let config = SolveConfig {
            steps: 10,
            paths,
            ..SolveConfig::default()
        };
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let bundle = simulate_paths(&grid, Dimensions::new(1, 1).unwrap(), paths, 1).unwrap();
        (config, bundle)
    }

    fn sampler() -> SamplerConfig {
        SamplerConfig {
            samples: 2000,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn identity_family_is_exactly_zero() {
        let (config, bundle) = setup(2000);
        let base = zero_problem(TerminalSpec::Brownian);
        let fam = FamilySpec::Identity.build(&base, &[1, 2, 4]).unwrap();
        let r = run_stability(&fam, &config, &bundle, &sampler()).unwrap();
        for row in &r.rows {
            assert!(row.metrics.as_ref().unwrap().values.iter().all(|v| v.value == 0.0));
        }
        assert!(r.pass);
    }

    #[test]
    fn terminal_shift_moves_y_by_one_over_m() {
        let (config, bundle) = setup(2000);
        let base = zero_problem(TerminalSpec::BrownianSquared);
        let fam = FamilySpec::TerminalShift.build(&base, &[1, 2, 4, 8, 16]).unwrap();
        let r = run_stability(&fam, &config, &bundle, &sampler()).unwrap();
        for row in &r.rows {
            let v = row.metrics.as_ref().unwrap().get("metric_61").unwrap().value;
            assert!((v * f64::from(row.m) - 1.0).abs() < 1e-10, "{}: {v}", row.m);
        }
        assert_eq!(verdicts(&r.floor, &r.rows), r.verdicts);
    }

    #[test]
    fn csv_has_floor_and_member_rows() {
        let (config, bundle) = setup(1000);
        let base = zero_problem(TerminalSpec::Brownian);
        let fam = FamilySpec::TerminalShift.build(&base, &[1, 2]).unwrap();
        let r = run_stability_s1m1(&fam, &config, &bundle, &sampler()).unwrap();
        let mut buf = Vec::new();
        write_stability_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 5);
        assert!(text.contains("2,metric_128,"));
        let gaps: Vec<f64> = r.certificates.iter().map(|c| c.terminal_gap.unwrap().value).collect();
        assert!((gaps[0] - 1.0).abs() < 1e-12 && (gaps[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn certification_rejects_understated_bounds() {
        let base = zero_problem(TerminalSpec::Brownian);
        let mut fam = FamilySpec::ScaleOffset {
            offset: Offset::Constant,
        }
        .build(&base, &[1, 2])
        .unwrap();
        assert!(certify(&fam, &sampler()).is_ok());
        fam.members[1].a_m = 0.1;
        assert!(matches!(certify(&fam, &sampler()), Err(Error::Precondition(_))));
        assert!(FamilySpec::Identity.build(&base, &[2, 1]).is_err());
        assert!(FamilySpec::Identity.build(&base, &[0]).is_err());
    }

    #[test]
    fn verdict_logic() {
        let floor = MetricSet {
            names: vec!["x".into()],
            values: vec![MetricValue {
                value: 0.01,
                std_error: 0.01,
            }],
        };
        let row = |m, v: f64| StabilityRow {
            m,
            a_m: 0.0,
            metrics: Some(MetricSet {
                names: vec!["x".into()],
                values: vec![MetricValue {
                    value: v,
                    std_error: 0.01,
                }],
            }),
            failure: None,
        };
        let v = verdicts(&floor, &[row(1, 1.0), row(2, 0.5), row(4, 0.03)]);
        assert!(v[0].pass());
        let v = verdicts(&floor, &[row(1, 1.0), row(2, 0.5), row(4, 0.2)]);
        assert!(v[0].monotone && !v[0].at_floor);
        let v = verdicts(&floor, &[row(1, 0.5), row(2, 1.0), row(4, 0.0)]);
        assert!(!v[0].monotone);
        let mut broken = row(8, 0.0);
        broken.metrics = None;
        let v = verdicts(&floor, &[row(1, 0.5), broken]);
        assert!(!v[0].pass());
    }
}
