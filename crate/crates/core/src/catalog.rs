//! Built-in generators: the two worked examples, a linear family with a
//! closed-form solution, and generators that violate one assumption each.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conditions::{
    check_a_family, check_h1, check_h1a_h1b, check_h2, check_h3, AParams, Assumption, ConditionReport, MonotoneVariant,
    SamplerConfig, Verdict,
};
use crate::error::{Error, Result};
use crate::generator::{Declared, FnGenerator, GProcess, Generator, GeneratorSpec, MaoDeclaration, Redeclared};
use crate::inequalities::Modulus;
use crate::numeric::norm;
use crate::stochastic::PathBundle;
use crate::types::{Dimensions, SolutionField, TerminalSpec};

/// Default junction point of the piecewise moduli.
pub fn default_delta() -> f64 {
    (-2f64).exp()
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < (-1f64).exp() {
        Ok(())
    } else {
        Err(Error::Configuration(format!("delta must lie in (0, 1/e), got {delta}")))
    }
}

/// `h(x) = −x|ln x|` on `(0, δ]`, continued linearly past `δ`, zero elsewhere.
pub fn h(delta: f64, x: f64) -> f64 {
    if x > 0.0 {
        -Modulus::log_osgood(delta).eval(x)
    } else {
        0.0
    }
}

/// `h̄(x) = −x|ln x|^{1/p}` on `(0, δ]`, continued linearly past `δ`, zero
/// elsewhere.
pub fn h_bar(delta: f64, p: f64, x: f64) -> f64 {
    if x > 0.0 {
        -Modulus::LogRoot { delta, p, scale: 1.0 }.eval(x)
    } else {
        0.0
    }
}

/// `g = h(|y|) − e^{|B_t| y} + (e^{−y} ∧ 1) sin|z| + t^{−1/2} 1{t>0}` with
/// `k = 1`.
#[derive(Debug)]
pub struct Example1 {
    delta: f64,
    dims: Dimensions,
    declared: Declared,
}

impl Example1 {
    fn smooth(&self, y: f64, z: &[f64], b: &[f64]) -> f64 {
        h(self.delta, y.abs()) - (norm(b) * y).exp() + (-y).exp().min(1.0) * norm(z).sin()
    }
}

impl Generator for Example1 {
    fn name(&self) -> String {
        "example1".into()
    }

    fn dims(&self) -> Dimensions {
        self.dims
    }

    fn declared(&self) -> &Declared {
        &self.declared
    }

    fn eval(&self, t: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        let singular = if t > 0.0 { 1.0 / t.sqrt() } else { 0.0 };
        out[0] = self.smooth(y[0], z, b) + singular;
    }

    fn step_increment(&self, t0: f64, t1: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        out[0] = self.smooth(y[0], z, b) * (t1 - t0) + 2.0 * (t1.max(0.0).sqrt() - t0.max(0.0).sqrt());
    }

    fn in_domain(&self, _t: f64, y: &[f64], _z: &[f64], b: &[f64]) -> bool {
        norm(b) * y[0] <= 700.0 && -y[0] <= 700.0
    }
}

pub fn make_example1(delta: f64, d: usize) -> Result<GeneratorSpec> {
    check_delta(delta)?;
    Ok(Arc::new(Example1 {
        delta,
        dims: Dimensions::new(1, d)?,
        declared: Declared {
            lambda: 1.0,
            gamma: 1.0,
            alpha: 0.25,
            rho: Modulus::log_osgood(delta),
            pbar: None,
            mao: None,
            g_process: GProcess::Zero,
        },
    }))
}

/// `g_i = e^{−y_i} + h̄(|y|) + (|z|² ∧ |z|^{2/3}) + |B_t|`.
#[derive(Debug)]
pub struct Example2 {
    delta: f64,
    p: f64,
    dims: Dimensions,
    declared: Declared,
}

impl Generator for Example2 {
    fn name(&self) -> String {
        "example2".into()
    }

    fn dims(&self) -> Dimensions {
        self.dims
    }

    fn declared(&self) -> &Declared {
        &self.declared
    }

    fn eval(&self, _t: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        let zn = norm(z);
        let common = h_bar(self.delta, self.p, norm(y)) + (zn * zn).min(zn.powf(2.0 / 3.0)) + norm(b);
        for (o, yi) in out.iter_mut().zip(y) {
            *o = (-yi).exp() + common;
        }
    }

    fn in_domain(&self, _t: f64, y: &[f64], _z: &[f64], _b: &[f64]) -> bool {
        y.iter().all(|v| -v <= 700.0)
    }
}

/// The vector components share the scalar terms, so the one-sided modulus,
/// the Lipschitz constant in `z` and the growth constant carry a factor `√k`.
/// The z-term has slope 2 near `|z| = 1`, hence `λ = 2√k`.
pub fn make_example2(p: f64, delta: f64, k: usize, d: usize) -> Result<GeneratorSpec> {
    check_delta(delta)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Configuration(format!("p must exceed 1, got {p}")));
    }
    let dims = Dimensions::new(k, d)?;
    let sk = (k as f64).sqrt();
    let rho = Modulus::LogRoot { delta, p, scale: sk };
    Ok(Arc::new(Example2 {
        delta,
        p,
        dims,
        declared: Declared {
            lambda: 2.0 * sk,
            gamma: sk,
            alpha: 2.0 / 3.0,
            rho: rho.clone(),
            pbar: Some(p),
            mao: Some(MaoDeclaration {
                p,
                varrho: Modulus::MaoLift {
                    p,
                    inner: Box::new(rho),
                },
            }),
            g_process: GProcess::Zero,
        },
    }))
}

/// Exact solution of the linear BSDE `g_j = a y_j + Σ_l b_l z_{jl} + c`.
///
/// Component `j` of the built-in Brownian terminals reads coordinate
/// `j mod d`. Under the measure in which `B` has drift `b`, the solution is a
/// discounted conditional expectation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearOracle {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: f64,
    pub dims: Dimensions,
}

impl LinearOracle {
    /// `(y_t, z_t)` at state `B_t = state`, `z` row-major `k × d`.
    pub fn solution(
        &self,
        terminal: &TerminalSpec,
        horizon: f64,
        t: f64,
        state: &[f64],
        y: &mut [f64],
        z: &mut [f64],
    ) -> Result<()> {
        let (k, d) = (self.dims.k, self.dims.d);
        let tau = horizon - t;
        let disc = (self.a * tau).exp();
        let carry = if self.a == 0.0 {
            self.c * tau
        } else {
            self.c * (disc - 1.0) / self.a
        };
        z.fill(0.0);
        for j in 0..k {
            let cj = j % d;
            let m = state[cj] + self.b[cj] * tau;
            y[j] = carry
                + disc
                    * match terminal {
                        TerminalSpec::Constant { value } => value[j],
                        TerminalSpec::Brownian => m,
                        TerminalSpec::BrownianSquared => m * m + tau,
                        other => {
                            return Err(Error::Precondition(format!(
                                "no closed form for terminal {other:?}; use constant, brownian or brownian_squared"
                            )))
                        }
                    };
            z[j * d + cj] = match terminal {
                TerminalSpec::Brownian => disc,
                TerminalSpec::BrownianSquared => 2.0 * disc * m,
                _ => 0.0,
            };
        }
        Ok(())
    }
}

/// Distances between a numerical solution and the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleErrors {
    /// `|mean y_0 − y_0|`.
    pub y0: f64,
    /// Mean of `|z − z^oracle|` over entries, paths and times before the horizon.
    pub z_mean_abs: f64,
}

impl LinearOracle {
    pub fn errors(&self, terminal: &TerminalSpec, field: &SolutionField, bundle: &PathBundle) -> Result<OracleErrors> {
        let (k, d) = (self.dims.k, self.dims.d);
        let m = field.path_count();
        let grid = field.grid();
        let horizon = grid.horizon();
        let mut y = vec![0.0; k];
        let mut z = vec![0.0; k * d];
        self.solution(terminal, horizon, grid.time(0), bundle.state(0, 0), &mut y, &mut z)?;
        let mean_y0: Vec<f64> = (0..k)
            .map(|j| crate::numeric::mean(&(0..m).map(|p| field.y(0, p)[j]).collect::<Vec<_>>()))
            .collect();
        let y0 = norm(&mean_y0.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        let mut per_time = Vec::with_capacity(field.steps());
        for i in 0..field.steps() {
            let mut acc = Vec::with_capacity(m);
            for p in 0..m {
                self.solution(terminal, horizon, grid.time(i), bundle.state(i, p), &mut y, &mut z)?;
                let s: f64 = field.z(i, p).iter().zip(&z).map(|(a, b)| (a - b).abs()).sum();
                acc.push(s / (k * d) as f64);
            }
            per_time.push(crate::numeric::mean(&acc));
        }
        Ok(OracleErrors {
            y0,
            z_mean_abs: crate::numeric::mean(&per_time),
        })
    }
}

/// The one-sided modulus is declared as `max(|a|, 1) u` so that windows stay
/// comparable across signs of `a`.
pub fn make_linear(a: f64, b: Vec<f64>, c: f64, dims: Dimensions) -> Result<(GeneratorSpec, LinearOracle)> {
    if b.len() != dims.d {
        return Err(Error::Configuration(format!(
            "b needs {} entries, got {}",
            dims.d,
            b.len()
        )));
    }
    if !(a.is_finite() && c.is_finite() && b.iter().all(|v| v.is_finite())) {
        return Err(Error::Configuration("linear coefficients must be finite".into()));
    }
    let declared = Declared {
        lambda: norm(&b),
        gamma: 1.0,
        alpha: 0.25,
        rho: Modulus::linear(a.abs().max(1.0)),
        pbar: None,
        mao: None,
        g_process: GProcess::Zero,
    };
    let oracle = LinearOracle {
        a,
        b: b.clone(),
        c,
        dims,
    };
    let d = dims.d;
    let ignores_z = b.iter().all(|v| *v == 0.0);
    let gen = FnGenerator::new("linear", dims, declared, ignores_z, move |_, y, z, _, out| {
        for (j, o) in out.iter_mut().enumerate() {
            let zj = &z[j * d..(j + 1) * d];
            *o = a * y[j] + zj.iter().zip(&b).map(|(zz, bb)| zz * bb).sum::<f64>() + c;
        }
    });
    Ok((gen, oracle))
}

fn zero_declared(rho: Modulus, lambda: f64) -> Declared {
    Declared {
        lambda,
        gamma: 1.0,
        alpha: 0.5,
        rho,
        pbar: Some(2.0),
        mao: None,
        g_process: GProcess::Zero,
    }
}

fn scalar_y(name: &str, d: usize, rho: Modulus, f: fn(f64) -> f64) -> Result<GeneratorSpec> {
    Ok(FnGenerator::new(
        name,
        Dimensions::new(1, d)?,
        zero_declared(rho, 0.0),
        true,
        move |_, y, _, _, out| out[0] = f(y[0]),
    ))
}

fn scalar_z(name: &str, d: usize, lambda: f64, f: fn(f64) -> f64) -> Result<GeneratorSpec> {
    Ok(FnGenerator::new(
        name,
        Dimensions::new(1, d)?,
        zero_declared(Modulus::linear(0.0), lambda),
        false,
        move |_, _, z, _, out| out[0] = f(norm(z)),
    ))
}

/// A parameter value: a number or a list of numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub default: ParamValue,
    pub doc: String,
}

/// A documented verdict. `p` is the order used for the `p`-order conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Documented {
    pub assumption: Assumption,
    pub verdict: Verdict,
    pub p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub formula: String,
    pub params: Vec<ParamSpec>,
    pub verdicts: Vec<Documented>,
    pub has_oracle: bool,
}

fn num(name: &str, default: f64, doc: &str) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        default: ParamValue::Number(default),
        doc: doc.into(),
    }
}

fn doc(assumption: Assumption, verdict: Verdict) -> Documented {
    Documented {
        assumption,
        verdict,
        p: None,
    }
}

fn entry(name: &str, formula: &str, params: Vec<ParamSpec>, verdicts: Vec<Documented>) -> CatalogEntry {
    CatalogEntry {
        name: name.into(),
        formula: formula.into(),
        params,
        verdicts,
        has_oracle: name == "linear",
    }
}

/// Every built-in generator with its parameters and documented verdicts.
pub fn catalog() -> Vec<CatalogEntry> {
    use Assumption::*;
    use Verdict::{Fail, Pass};
    let d = || num("d", 1.0, "Brownian dimension");
    let k = || num("k", 1.0, "dimension of y");
    vec![
        entry(
            "example1",
            "h(|y|) - exp(|B_t| y) + min(exp(-y), 1) sin|z| + t^(-1/2)",
            vec![num("delta", default_delta(), "junction of h, in (0, 1/e)"), d()],
            vec![doc(H1, Pass), doc(H2, Pass), doc(H3, Pass)],
        ),
        entry(
            "example2",
            "g_i = exp(-y_i) + hbar(|y|) + min(|z|^2, |z|^(2/3)) + |B_t|",
            vec![
                num("p", 2.0, "order of the Mao condition, > 1"),
                num("delta", default_delta(), "junction of hbar, in (0, 1/e)"),
                num("k", 2.0, "dimension of y"),
                d(),
            ],
            vec![
                doc(H1, Pass),
                Documented {
                    assumption: H1b,
                    verdict: Pass,
                    p: Some(2.0),
                },
                doc(H2, Pass),
                doc(H3, Pass),
            ],
        ),
        entry(
            "linear",
            "a y + b z + c",
            vec![
                num("a", -1.0, "coefficient of y"),
                ParamSpec {
                    name: "b".into(),
                    default: ParamValue::List(vec![0.0]),
                    doc: "coefficients of z, one per Brownian coordinate".into(),
                },
                num("c", 0.0, "constant"),
                k(),
                d(),
            ],
            vec![doc(H1, Pass), doc(H2, Pass), doc(H3, Pass)],
        ),
        entry(
            "zero",
            "0",
            vec![k(), d()],
            vec![
                doc(H1, Pass),
                doc(H2, Pass),
                doc(H3, Pass),
                doc(A1, Pass),
                doc(A2, Pass),
                doc(A3, Pass),
            ],
        ),
        entry(
            "neg_cube",
            "-y^3",
            vec![d()],
            vec![doc(H1, Pass), doc(H2, Pass), doc(H3, Pass)],
        ),
        entry(
            "sin_abs_z",
            "sin|z|",
            vec![d()],
            vec![doc(H1, Pass), doc(H2, Pass), doc(H3, Pass)],
        ),
        entry(
            "sqrt_sign",
            "sign(y) sqrt|y|",
            vec![d()],
            vec![doc(H1, Fail), doc(H2, Pass), doc(H3, Pass)],
        ),
        entry(
            "abs_y",
            "|y|",
            vec![d()],
            vec![doc(H1, Pass), doc(H2, Pass), doc(A1, Fail)],
        ),
        entry(
            "z_squared",
            "|z|^2",
            vec![num("lambda", 1.0, "declared Lipschitz constant in z"), d()],
            vec![doc(H1, Pass), doc(H2, Pass), doc(H3, Fail)],
        ),
        entry(
            "y_squared",
            "y^2",
            vec![d()],
            vec![
                doc(H1, Fail),
                Documented {
                    assumption: H1a,
                    verdict: Fail,
                    p: Some(2.0),
                },
                doc(H2, Pass),
                doc(H3, Pass),
            ],
        ),
        entry(
            "step",
            "1{y >= 0}",
            vec![d()],
            vec![doc(H1, Fail), doc(H2, Fail), doc(H3, Pass)],
        ),
    ]
}

/// A generator built from the catalog, with its oracle when one exists.
#[derive(Clone, Debug)]
pub struct Built {
    pub generator: GeneratorSpec,
    pub oracle: Option<LinearOracle>,
}

fn lookup(name: &str) -> Result<CatalogEntry> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Configuration(format!("unknown generator `{name}`")))
}

/// Builds a catalog generator. Missing parameters take their defaults;
/// unknown ones are rejected.
pub fn build(name: &str, params: &Params) -> Result<Built> {
    let mut params = params.clone();
    let overrides: Vec<(&str, Option<ParamValue>)> =
        DECLARED_OVERRIDES.iter().map(|&k| (k, params.remove(k))).collect();
    let mut built = build_plain(name, &params)?;
    if overrides.iter().all(|(_, v)| v.is_none()) {
        return Ok(built);
    }
    let mut declared = built.generator.declared().clone();
    for (key, v) in overrides {
        let x = match v {
            None => continue,
            Some(ParamValue::Number(x)) => x,
            Some(ParamValue::List(_)) => {
                return Err(Error::Configuration(format!("parameter `{key}` must be a number")))
            }
        };
        match key {
            "alpha" => declared.alpha = x,
            "gamma" => declared.gamma = x,
            _ => unreachable!("listed override"),
        }
    }
    declared
        .validate()
        .map_err(|e| Error::Configuration(format!("generator `{name}`: {e}")))?;
    built.generator = Redeclared::wrap(built.generator, declared);
    Ok(built)
}

/// Declared constants any entry accepts as parameters, replacing the value
/// the factory declares.
pub const DECLARED_OVERRIDES: [&str; 2] = ["alpha", "gamma"];

fn build_plain(name: &str, params: &Params) -> Result<Built> {
    let entry = lookup(name)?;
    for key in params.keys() {
        if !entry.params.iter().any(|p| &p.name == key) {
            return Err(Error::Configuration(format!(
                "generator `{name}` has no parameter `{key}`"
            )));
        }
    }
    let value = |key: &str| -> ParamValue {
        params.get(key).cloned().unwrap_or_else(|| {
            entry
                .params
                .iter()
                .find(|p| p.name == key)
                .map(|p| p.default.clone())
                .expect("declared parameter")
        })
    };
    let number = |key: &str| -> Result<f64> {
        match value(key) {
            ParamValue::Number(x) => Ok(x),
            ParamValue::List(_) => Err(Error::Configuration(format!("parameter `{key}` must be a number"))),
        }
    };
    let count = |key: &str| -> Result<usize> {
        let x = number(key)?;
        if x >= 1.0 && x.fract() == 0.0 && x <= 1e6 {
            Ok(x as usize)
        } else {
            Err(Error::Configuration(format!(
                "parameter `{key}` must be a positive integer, got {x}"
            )))
        }
    };
    let plain = |generator: Result<GeneratorSpec>| {
        generator.map(|generator| Built {
            generator,
            oracle: None,
        })
    };
    match name {
        "example1" => plain(make_example1(number("delta")?, count("d")?)),
        "example2" => plain(make_example2(number("p")?, number("delta")?, count("k")?, count("d")?)),
        "linear" => {
            let d = count("d")?;
            let b = match value("b") {
                ParamValue::List(v) if v.len() == d => v,
                ParamValue::List(v) if v.len() == 1 => vec![v[0]; d],
                ParamValue::Number(x) => vec![x; d],
                ParamValue::List(v) => {
                    return Err(Error::Configuration(format!(
                        "b needs 1 or {d} entries, got {}",
                        v.len()
                    )))
                }
            };
            let (generator, oracle) = make_linear(number("a")?, b, number("c")?, Dimensions::new(count("k")?, d)?)?;
            Ok(Built {
                generator,
                oracle: Some(oracle),
            })
        }
        "zero" => {
            let dims = Dimensions::new(count("k")?, count("d")?)?;
            plain(Ok(FnGenerator::new(
                "zero",
                dims,
                zero_declared(Modulus::linear(0.0), 0.0),
                true,
                |_, _, _, _, out| out.fill(0.0),
            )))
        }
        "neg_cube" => plain(scalar_y("neg_cube", count("d")?, Modulus::linear(0.0), |y| -y * y * y)),
        "sqrt_sign" => plain(scalar_y("sqrt_sign", count("d")?, Modulus::linear(1.0), |y| {
            y.abs().sqrt() * y.signum()
        })),
        "abs_y" => plain(scalar_y("abs_y", count("d")?, Modulus::linear(1.0), f64::abs)),
        "y_squared" => plain(scalar_y("y_squared", count("d")?, Modulus::linear(1.0), |y| y * y)),
        "step" => plain(scalar_y("step", count("d")?, Modulus::linear(1.0), |y| {
            if y >= 0.0 {
                1.0
            } else {
                0.0
            }
        })),
        "sin_abs_z" => plain(scalar_z("sin_abs_z", count("d")?, 1.0, f64::sin)),
        "z_squared" => plain(scalar_z("z_squared", count("d")?, number("lambda")?, |r| r * r)),
        _ => unreachable!("catalog entry without a factory"),
    }
}

/// Runs the condition check for one assumption. The `p`-order conditions use
/// `p` (default 2) with the generator's declared moduli.
pub fn run_check(
    gen: &GeneratorSpec,
    assumption: Assumption,
    p: Option<f64>,
    a_params: &AParams,
    cfg: &SamplerConfig,
) -> Result<ConditionReport> {
    let p = p.unwrap_or(2.0);
    match assumption {
        Assumption::H1 => check_h1(gen, cfg),
        Assumption::H2 => check_h2(gen, cfg),
        Assumption::H3 => check_h3(gen, cfg),
        Assumption::H1a => check_h1a_h1b(gen, p, MonotoneVariant::A, None, cfg),
        Assumption::H1b => check_h1a_h1b(gen, p, MonotoneVariant::B, None, cfg),
        Assumption::A1 | Assumption::A2 | Assumption::A3 => check_a_family(gen, assumption, a_params, cfg),
        Assumption::H4 => Err(Error::Precondition(
            "H4 concerns the terminal value and needs a problem and a path bundle".into(),
        )),
    }
}

/// Outcome of reproducing one documented verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfTestLine {
    pub generator: String,
    pub assumption: Assumption,
    pub expected: Verdict,
    pub observed: Verdict,
}

/// Reruns every documented verdict of every entry with default parameters.
pub fn self_test(cfg: &SamplerConfig) -> Result<Vec<SelfTestLine>> {
    let mut out = Vec::new();
    for e in catalog() {
        let built = build(&e.name, &Params::new())?;
        for d in &e.verdicts {
            let report = run_check(&built.generator, d.assumption, d.p, &AParams::default(), cfg)?;
            out.push(SelfTestLine {
                generator: e.name.clone(),
                assumption: d.assumption,
                expected: d.verdict,
                observed: report.verdict,
            });
        }
    }
    Ok(out)
}
