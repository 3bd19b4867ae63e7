//! Problem and solution types shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorSpec;
use crate::stochastic::{PathBundle, RegressionFit, TimeGrid};

/// State dimension `k` and Brownian dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub k: usize,
    pub d: usize,
}

impl Dimensions {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::MalformedInput(format!(
                "dimensions must be positive, got k = {k}, d = {d}"
            )));
        }
        Ok(Dimensions { k, d })
    }

    /// Number of entries of a `k × d` matrix.
    pub fn kd(&self) -> usize {
        self.k * self.d
    }
}

/// Radial clamp `x · n / max(n, |x|)`, applied in place.
pub fn radial_clamp(x: &mut [f64], n: f64) {
    let r = crate::numeric::norm(x);
    if r > n {
        let s = n / r;
        for v in x {
            *v *= s;
        }
    }
}

/// Terminal conditions as functions of the Brownian state at the horizon.
///
/// Component `i` of the vector-valued terminals reads Brownian coordinate
/// `i mod d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TerminalSpec {
    Constant {
        value: Vec<f64>,
    },
    /// `ξ_i = B_T^{i mod d}`.
    Brownian,
    /// `ξ_i = (B_T^{i mod d})²`.
    BrownianSquared,
    /// `ξ_i = min(|B_T|, cap)` with the Euclidean norm of `B_T`.
    AbsBrownian {
        cap: Option<f64>,
    },
    /// `ξ_i = exp(c · |B_T|²)`.
    ExpSquare {
        c: f64,
    },
    /// Pareto variable with unit scale and the given tail index, built from
    /// the first Brownian coordinate: `ξ_i = (1 − Φ(B_T^0 / √T))^{-1/tail}`.
    Pareto {
        tail: f64,
    },
    Scaled {
        factor: f64,
        inner: Box<TerminalSpec>,
    },
    Shifted {
        shift: Vec<f64>,
        inner: Box<TerminalSpec>,
    },
    /// Radial clamp at level `n`.
    Truncated {
        n: f64,
        inner: Box<TerminalSpec>,
    },
}

impl TerminalSpec {
    pub fn validate(&self, dims: Dimensions) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        match self {
            TerminalSpec::Constant { value } if value.len() != dims.k => bad(format!(
                "terminal.value has {} components, expected k = {}",
                value.len(),
                dims.k
            )),
            TerminalSpec::Constant { value } if value.iter().any(|v| !v.is_finite()) => {
                bad("terminal.value must be finite".into())
            }
            TerminalSpec::AbsBrownian { cap: Some(c) } if !(*c > 0.0) => {
                bad(format!("terminal.cap must be positive, got {c}"))
            }
            TerminalSpec::ExpSquare { c } if !c.is_finite() => bad("terminal.c must be finite".into()),
            TerminalSpec::Pareto { tail } if !(*tail > 0.0 && tail.is_finite()) => {
                bad(format!("terminal.tail must be positive, got {tail}"))
            }
            TerminalSpec::Scaled { factor, inner } => {
                if !factor.is_finite() {
                    return bad("terminal.factor must be finite".into());
                }
                inner.validate(dims)
            }
            TerminalSpec::Shifted { shift, inner } => {
                if shift.len() != dims.k {
                    return bad(format!(
                        "terminal.shift has {} components, expected k = {}",
                        shift.len(),
                        dims.k
                    ));
                }
                inner.validate(dims)
            }
            TerminalSpec::Truncated { n, inner } => {
                if !(*n > 0.0) {
                    return bad(format!("truncation level must be positive, got {n}"));
                }
                inner.validate(dims)
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the terminal at Brownian state `b` (the value of `B_T`).
    pub fn eval(&self, b: &[f64], horizon: f64, out: &mut [f64]) {
        let d = b.len();
        match self {
            TerminalSpec::Constant { value } => out.copy_from_slice(value),
            TerminalSpec::Brownian => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[i % d];
                }
            }
            TerminalSpec::BrownianSquared => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[i % d] * b[i % d];
                }
            }
            TerminalSpec::AbsBrownian { cap } => {
                let r = crate::numeric::norm(b);
                out.fill(cap.map_or(r, |c| r.min(c)));
            }
            TerminalSpec::ExpSquare { c } => {
                let r2: f64 = b.iter().map(|x| x * x).sum();
                out.fill((c * r2).exp());
            }
            TerminalSpec::Pareto { tail } => {
                let x = if horizon > 0.0 { b[0] / horizon.sqrt() } else { 0.0 };
                let survival = (0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)).max(f64::MIN_POSITIVE);
                out.fill(survival.powf(-1.0 / tail));
            }
            TerminalSpec::Scaled { factor, inner } => {
                inner.eval(b, horizon, out);
                for o in out.iter_mut() {
                    *o *= factor;
                }
            }
            TerminalSpec::Shifted { shift, inner } => {
                inner.eval(b, horizon, out);
                for (o, s) in out.iter_mut().zip(shift) {
                    *o += s;
                }
            }
            TerminalSpec::Truncated { n, inner } => {
                inner.eval(b, horizon, out);
                radial_clamp(out, *n);
            }
        }
    }

    /// Terminal values for every path of a bundle, path-major (`M × k`).
    pub fn sample(&self, bundle: &PathBundle, k: usize) -> Vec<f64> {
        let n = bundle.steps();
        let horizon = bundle.grid().horizon();
        let m = bundle.path_count();
        let mut out = vec![0.0; m * k];
        for p in 0..m {
            self.eval(bundle.state(n, p), horizon, &mut out[p * k..(p + 1) * k]);
        }
        out
    }
}

/// A BSDE `y_t = ξ + ∫_t^T g(s, y_s, z_s) ds − ∫_t^T z_s dB_s`.
#[derive(Clone, Debug)]
pub struct BSDEProblem {
    pub terminal: TerminalSpec,
    pub horizon: f64,
    pub generator: GeneratorSpec,
    pub dims: Dimensions,
}

impl BSDEProblem {
    pub fn new(terminal: TerminalSpec, horizon: f64, generator: GeneratorSpec, dims: Dimensions) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::Configuration(format!(
                "horizon must be finite and nonnegative, got {horizon}"
            )));
        }
        if generator.dims() != dims {
            return Err(Error::Configuration(format!(
                "generator dimensions {:?} do not match problem dimensions {:?}",
                generator.dims(),
                dims
            )));
        }
        terminal.validate(dims)?;
        Ok(BSDEProblem {
            terminal,
            horizon,
            generator,
            dims,
        })
    }

    pub fn with_terminal(&self, terminal: TerminalSpec) -> Result<Self> {
        BSDEProblem::new(terminal, self.horizon, self.generator.clone(), self.dims)
    }

    pub fn with_generator(&self, generator: GeneratorSpec) -> Result<Self> {
        BSDEProblem::new(self.terminal.clone(), self.horizon, generator, self.dims)
    }
}

/// Per-path values of `(y, z)` on a grid plus the regression fits that
/// produced them.
///
/// `y_fits[i]` is the fit of `E[y_{i+1} | F_{t_i}]` and `z_fits[i]` the fit of
/// `z_{t_i}`, both as functions of `B_{t_i}`, for `i < N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionField {
    grid: TimeGrid,
    dims: Dimensions,
    path_count: usize,
    /// `[(i * M + p) * k + j]`
    y: Vec<f64>,
    /// `[((i * M + p) * k + j) * d + c]`
    z: Vec<f64>,
    pub y_fits: Vec<Option<RegressionFit>>,
    pub z_fits: Vec<Option<RegressionFit>>,
}

impl SolutionField {
    /// Builds a field from raw arrays, checking their shapes.
    pub fn from_parts(grid: TimeGrid, dims: Dimensions, path_count: usize, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let times = grid.steps() + 1;
        if y.len() != times * path_count * dims.k || z.len() != times * path_count * dims.kd() {
            return Err(Error::MalformedInput(format!(
                "field arrays have lengths {} and {}, expected {} and {}",
                y.len(),
                z.len(),
                times * path_count * dims.k,
                times * path_count * dims.kd()
            )));
        }
        Ok(SolutionField {
            y_fits: vec![None; grid.steps()],
            z_fits: vec![None; grid.steps()],
            grid,
            dims,
            path_count,
            y,
            z,
        })
    }

    pub fn zeros(grid: TimeGrid, dims: Dimensions, path_count: usize) -> Self {
        let times = grid.steps() + 1;
        SolutionField {
            y_fits: vec![None; grid.steps()],
            z_fits: vec![None; grid.steps()],
            y: vec![0.0; times * path_count * dims.k],
            z: vec![0.0; times * path_count * dims.kd()],
            grid,
            dims,
            path_count,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn path_count(&self) -> usize {
        self.path_count
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn y(&self, i: usize, p: usize) -> &[f64] {
        let k = self.dims.k;
        let at = (i * self.path_count + p) * k;
        &self.y[at..at + k]
    }

    pub fn z(&self, i: usize, p: usize) -> &[f64] {
        let kd = self.dims.kd();
        let at = (i * self.path_count + p) * kd;
        &self.z[at..at + kd]
    }

    /// All `y` values at time index `i`, path-major.
    pub fn y_at(&self, i: usize) -> &[f64] {
        let s = self.path_count * self.dims.k;
        &self.y[i * s..(i + 1) * s]
    }

    pub fn y_at_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.path_count * self.dims.k;
        &mut self.y[i * s..(i + 1) * s]
    }

    pub fn z_at(&self, i: usize) -> &[f64] {
        let s = self.path_count * self.dims.kd();
        &self.z[i * s..(i + 1) * s]
    }

    pub fn z_at_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.path_count * self.dims.kd();
        &mut self.z[i * s..(i + 1) * s]
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    /// `(time index, path index)` pairs holding a non-finite entry.
    pub fn non_finite(&self) -> Vec<(usize, usize)> {
        let (m, k, kd) = (self.path_count, self.dims.k, self.dims.kd());
        let mut out = Vec::new();
        for i in 0..=self.steps() {
            for p in 0..m {
                let ys = &self.y[(i * m + p) * k..(i * m + p + 1) * k];
                let zs = &self.z[(i * m + p) * kd..(i * m + p + 1) * kd];
                if ys.iter().chain(zs).any(|v| !v.is_finite()) {
                    out.push((i, p));
                }
            }
        }
        out
    }

    /// The same field with every `y` and `z` entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> SolutionField {
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v *= c);
        out.z.iter_mut().for_each(|v| *v *= c);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_reject_zero() {
        assert!(Dimensions::new(0, 1).is_err());
        assert!(Dimensions::new(1, 0).is_err());
        assert_eq!(Dimensions::new(2, 3).unwrap().kd(), 6);
    }

    #[test]
    fn radial_clamp_scales_onto_the_ball() {
        let mut x = [3.0];
        radial_clamp(&mut x, 2.0);
        assert_eq!(x, [2.0]);
        let mut v = [3.0, 4.0];
        radial_clamp(&mut v, 2.0);
        assert!((v[0] - 1.2).abs() < 1e-15 && (v[1] - 1.6).abs() < 1e-15);
        let mut inside = [0.3, -0.4];
        radial_clamp(&mut inside, 2.0);
        assert_eq!(inside, [0.3, -0.4]);
    }

    #[test]
    fn pareto_terminal_has_unit_scale() {
        let t = TerminalSpec::Pareto { tail: 1.5 };
        let mut out = [0.0];
        // B_T = 0 is the median, survival 1/2.
        t.eval(&[0.0], 1.0, &mut out);
        assert!((out[0] - 2f64.powf(1.0 / 1.5)).abs() < 1e-12);
        t.eval(&[-40.0], 1.0, &mut out);
        assert!((out[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nested_terminals_compose() {
        let t = TerminalSpec::Shifted {
            shift: vec![0.5],
            inner: Box::new(TerminalSpec::Scaled {
                factor: 2.0,
                inner: Box::new(TerminalSpec::AbsBrownian { cap: Some(5.0) }),
            }),
        };
        let mut out = [0.0];
        t.eval(&[-7.0], 1.0, &mut out);
        assert_eq!(out[0], 10.5);
    }

    #[test]
    fn field_shapes_are_checked() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let dims = Dimensions::new(2, 3).unwrap();
        assert!(SolutionField::from_parts(grid.clone(), dims, 3, vec![0.0; 30], vec![0.0; 90]).is_ok());
        assert!(SolutionField::from_parts(grid, dims, 3, vec![0.0; 29], vec![0.0; 90]).is_err());
    }
}
