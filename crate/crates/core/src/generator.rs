//! Generators `g(t, y, z)` with their declared structural constants.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::inequalities::Modulus;
use crate::numeric::norm;
use crate::types::{radial_clamp, Dimensions};

/// The nonnegative process `g_t` of the sublinear growth bound in `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GProcess {
    Zero,
    Constant {
        c: f64,
    },
    /// `c · |B_t|`.
    AbsBrownian {
        c: f64,
    },
}

impl GProcess {
    pub fn eval(&self, _t: f64, b: &[f64]) -> f64 {
        match self {
            GProcess::Zero => 0.0,
            GProcess::Constant { c } => *c,
            GProcess::AbsBrownian { c } => c * norm(b),
        }
    }
}

/// A declared (H1b)_p modulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaoDeclaration {
    pub p: f64,
    pub varrho: Modulus,
}

/// Constants a generator claims to satisfy. The condition checkers test the
/// claims; the solver uses them to size its time windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Declared {
    /// Lipschitz constant in `z`.
    pub lambda: f64,
    pub gamma: f64,
    /// Sublinear growth exponent in `z`, in `(0, 1)`.
    pub alpha: f64,
    /// One-sided Osgood modulus in `y`.
    pub rho: Modulus,
    /// Exponent for which `∫_{0+} u^{p̄-1}/ρ^{p̄} = ∞`, needed when `α ≥ 1/2`.
    pub pbar: Option<f64>,
    pub mao: Option<MaoDeclaration>,
    pub g_process: GProcess,
}

impl Declared {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(p) = self.pbar {
            if !(p > 1.0 && p.is_finite()) {
                return Err(format!("pbar must exceed 1, got {p}"));
            }
        }
        self.rho.validate().map_err(|e| format!("rho: {e}"))?;
        if let Some(m) = &self.mao {
            m.varrho.validate().map_err(|e| format!("varrho: {e}"))?;
        }
        Ok(())
    }
}

/// `g(t, y, z)` evaluated with the current Brownian state `b = B_t`.
///
/// `y` has `k` entries, `z` is a row-major `k × d` matrix and `b` has `d`
/// entries. Implementations must be pure.
pub trait Generator: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn dims(&self) -> Dimensions;

    fn declared(&self) -> &Declared;

    fn eval(&self, t: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]);

    /// `∫_{t0}^{t1} g(s, y, z) ds` with `y`, `z` and `B` frozen at `t0`.
    ///
    /// The default is the left-endpoint rectangle. Generators with integrable
    /// singularities in `t` override it with the exact integral of the
    /// singular part.
    fn step_increment(&self, t0: f64, t1: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        self.eval(t0, y, z, b, out);
        let dt = t1 - t0;
        for o in out.iter_mut() {
            *o *= dt;
        }
    }

    /// Whether the value never depends on `z`.
    fn ignores_z(&self) -> bool {
        false
    }

    /// Arguments for which `eval` is finite. Samplers skip points outside.
    fn in_domain(&self, _t: f64, _y: &[f64], _z: &[f64], _b: &[f64]) -> bool {
        true
    }
}

pub type GeneratorSpec = Arc<dyn Generator>;

type EvalFn = dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync;

/// A generator defined by a closure.
pub struct FnGenerator {
    name: String,
    dims: Dimensions,
    declared: Declared,
    ignores_z: bool,
    f: Box<EvalFn>,
}

impl FnGenerator {
    #[allow(clippy::new_ret_no_self)]
    pub fn new(
        name: impl Into<String>,
        dims: Dimensions,
        declared: Declared,
        ignores_z: bool,
        f: impl Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> GeneratorSpec {
        Arc::new(FnGenerator {
            name: name.into(),
            dims,
            declared,
            ignores_z,
            f: Box::new(f),
        })
    }
}

impl fmt::Debug for FnGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnGenerator")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .finish_non_exhaustive()
    }
}

impl Generator for FnGenerator {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn dims(&self) -> Dimensions {
        self.dims
    }

    fn declared(&self) -> &Declared {
        &self.declared
    }

    fn eval(&self, t: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        (self.f)(t, y, z, b, out)
    }

    fn ignores_z(&self) -> bool {
        self.ignores_z
    }
}

/// `g^n(t, y, z) = g(t, y, z) − g(t, 0, z) + q_n(g(t, 0, z))`.
///
/// For step increments the clamp is applied to the step average of
/// `g(·, 0, z)`, which is exact when the generator is continuous in `t`.
#[derive(Debug)]
pub struct TruncatedGenerator {
    inner: GeneratorSpec,
    n: f64,
}

impl TruncatedGenerator {
    pub fn wrap(inner: GeneratorSpec, n: f64) -> GeneratorSpec {
        Arc::new(TruncatedGenerator { inner, n })
    }

    pub fn level(&self) -> f64 {
        self.n
    }
}

impl Generator for TruncatedGenerator {
    fn name(&self) -> String {
        format!("{}|q{}", self.inner.name(), self.n)
    }

    fn dims(&self) -> Dimensions {
        self.inner.dims()
    }

    fn declared(&self) -> &Declared {
        self.inner.declared()
    }

    fn eval(&self, t: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        let k = out.len();
        let zero = vec![0.0; k];
        let mut at0 = vec![0.0; k];
        self.inner.eval(t, y, z, b, out);
        self.inner.eval(t, &zero, z, b, &mut at0);
        for (o, a) in out.iter_mut().zip(&at0) {
            *o -= a;
        }
        radial_clamp(&mut at0, self.n);
        for (o, a) in out.iter_mut().zip(&at0) {
            *o += a;
        }
    }

    fn step_increment(&self, t0: f64, t1: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        let k = out.len();
        let dt = t1 - t0;
        let zero = vec![0.0; k];
        let mut at0 = vec![0.0; k];
        self.inner.step_increment(t0, t1, y, z, b, out);
        self.inner.step_increment(t0, t1, &zero, z, b, &mut at0);
        for (o, a) in out.iter_mut().zip(at0.iter_mut()) {
            *o -= *a;
            if dt > 0.0 {
                *a /= dt;
            }
        }
        radial_clamp(&mut at0, self.n);
        for (o, a) in out.iter_mut().zip(&at0) {
            *o += a * dt;
        }
    }

    fn ignores_z(&self) -> bool {
        self.inner.ignores_z()
    }

    fn in_domain(&self, t: f64, y: &[f64], z: &[f64], b: &[f64]) -> bool {
        self.inner.in_domain(t, y, z, b) && self.inner.in_domain(t, &vec![0.0; y.len()], z, b)
    }
}

/// A generator with replaced declared constants. Values are unchanged.
#[derive(Debug)]
pub struct Redeclared {
    inner: GeneratorSpec,
    declared: Declared,
}

impl Redeclared {
    pub fn wrap(inner: GeneratorSpec, declared: Declared) -> GeneratorSpec {
        Arc::new(Redeclared { inner, declared })
    }
}

impl Generator for Redeclared {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn dims(&self) -> Dimensions {
        self.inner.dims()
    }

    fn declared(&self) -> &Declared {
        &self.declared
    }

    fn eval(&self, t: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        self.inner.eval(t, y, z, b, out)
    }

    fn step_increment(&self, t0: f64, t1: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        self.inner.step_increment(t0, t1, y, z, b, out)
    }

    fn ignores_z(&self) -> bool {
        self.inner.ignores_z()
    }

    fn in_domain(&self, t: f64, y: &[f64], z: &[f64], b: &[f64]) -> bool {
        self.inner.in_domain(t, y, z, b)
    }
}

/// `g(t, y, z) + c + amp · sin(t) e_j`: the perturbations used by the
/// stability harness.
#[derive(Debug)]
pub struct OffsetGenerator {
    inner: GeneratorSpec,
    constant: Vec<f64>,
    sine: Option<(usize, f64)>,
}

impl OffsetGenerator {
    pub fn constant(inner: GeneratorSpec, constant: Vec<f64>) -> GeneratorSpec {
        Arc::new(OffsetGenerator {
            inner,
            constant,
            sine: None,
        })
    }

    pub fn sine(inner: GeneratorSpec, component: usize, amplitude: f64) -> GeneratorSpec {
        let k = inner.dims().k;
        Arc::new(OffsetGenerator {
            inner,
            constant: vec![0.0; k],
            sine: Some((component, amplitude)),
        })
    }
}

impl Generator for OffsetGenerator {
    fn name(&self) -> String {
        format!("{}+offset", self.inner.name())
    }

    fn dims(&self) -> Dimensions {
        self.inner.dims()
    }

    fn declared(&self) -> &Declared {
        self.inner.declared()
    }

    fn eval(&self, t: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        self.inner.eval(t, y, z, b, out);
        for (o, c) in out.iter_mut().zip(&self.constant) {
            *o += c;
        }
        if let Some((j, amp)) = self.sine {
            out[j] += amp * t.sin();
        }
    }

    fn step_increment(&self, t0: f64, t1: f64, y: &[f64], z: &[f64], b: &[f64], out: &mut [f64]) {
        self.inner.step_increment(t0, t1, y, z, b, out);
        let dt = t1 - t0;
        for (o, c) in out.iter_mut().zip(&self.constant) {
            *o += c * dt;
        }
        if let Some((j, amp)) = self.sine {
            out[j] += amp * t0.sin() * dt;
        }
    }

    fn ignores_z(&self) -> bool {
        self.inner.ignores_z()
    }

    fn in_domain(&self, t: f64, y: &[f64], z: &[f64], b: &[f64]) -> bool {
        self.inner.in_domain(t, y, z, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn declared() -> Declared {
        Declared {
            lambda: 0.0,
            gamma: 1.0,
            alpha: 0.5,
            rho: Modulus::linear(1.0),
            pbar: None,
            mao: None,
            g_process: GProcess::Zero,
        }
    }

    #[test]
    fn truncation_keeps_differences_and_bounds_value_at_zero() {
        let dims = Dimensions::new(2, 1).unwrap();
        let g = FnGenerator::new("affine", dims, declared(), true, |_, y, _, _, out| {
            out[0] = y[0] + 30.0;
            out[1] = -y[1] + 40.0;
        });
        let gn = TruncatedGenerator::wrap(g.clone(), 2.0);
        let mut a = [0.0; 2];
        gn.eval(0.0, &[0.0, 0.0], &[0.0, 0.0], &[0.0], &mut a);
        assert!((a[0] - 1.2).abs() < 1e-14 && (a[1] - 1.6).abs() < 1e-14);
        let (mut u, mut v, mut gu, mut gv) = ([0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2]);
        gn.eval(0.3, &[1.0, -2.0], &[0.0, 0.0], &[0.0], &mut u);
        gn.eval(0.3, &[4.0, 5.0], &[0.0, 0.0], &[0.0], &mut v);
        g.eval(0.3, &[1.0, -2.0], &[0.0, 0.0], &[0.0], &mut gu);
        g.eval(0.3, &[4.0, 5.0], &[0.0, 0.0], &[0.0], &mut gv);
        for j in 0..2 {
            assert!(((u[j] - v[j]) - (gu[j] - gv[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_of_zero_is_identity() {
        let dims = Dimensions::new(1, 1).unwrap();
        let g = FnGenerator::new("odd", dims, declared(), true, |_, y, _, _, out| out[0] = -y[0].powi(3));
        let gn = TruncatedGenerator::wrap(g.clone(), 1.0);
        for y in [-3.0, 0.0, 0.5, 7.0] {
            let (mut a, mut b) = ([0.0], [0.0]);
            g.eval(0.1, &[y], &[0.0], &[0.0], &mut a);
            gn.eval(0.1, &[y], &[0.0], &[0.0], &mut b);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn offsets_add() {
        let dims = Dimensions::new(2, 1).unwrap();
        let g = FnGenerator::new("zero", dims, declared(), true, |_, _, _, _, out| out.fill(0.0));
        let shifted = OffsetGenerator::constant(g.clone(), vec![0.25, -1.0]);
        let mut out = [0.0; 2];
        shifted.eval(0.0, &[0.0; 2], &[0.0; 2], &[0.0], &mut out);
        assert_eq!(out, [0.25, -1.0]);
        let wave = OffsetGenerator::sine(g, 1, 0.5);
        wave.eval(1.0, &[0.0; 2], &[0.0; 2], &[0.0], &mut out);
        assert_eq!(out, [0.0, 0.5 * 1f64.sin()]);
    }
}
