use serde::{Deserialize, Serialize};

use super::bounds::{divergence_test, Divergence};

/// A nondecreasing function `ρ: [0, ∞) → [0, ∞)` with `ρ(0) = 0`.
///
/// The variants cover the moduli used by the built-in generators and the
/// transforms between the (H1), (H1a)_p and (H1b)_p forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Modulus {
    /// `a · u`.
    Linear { a: f64 },
    /// `c · u^e` with `0 < e ≤ 1`.
    Power { c: f64, e: f64 },
    /// `scale · u |ln u|` on `(0, δ]`, continued by its tangent line at `δ`.
    LogOsgood { delta: f64, scale: f64 },
    /// `scale · u |ln u|^{1/p}` on `(0, δ]`, continued by its tangent line.
    LogRoot { delta: f64, p: f64, scale: f64 },
    /// `inner(u^{1/p})^p`: the (H1b)_p modulus whose `1/p`-th power at `v^p`
    /// equals `inner(v)`.
    MaoLift { p: f64, inner: Box<Modulus> },
    /// `u^{(p-1)/p} · inner(u^{1/p})`: the (H1a)_p right-hand side implied by
    /// an (H1) modulus `inner`.
    WeakLift { p: f64, inner: Box<Modulus> },
    /// `inner(u^p)^{1/p}`: the (H1) modulus implied by an (H1b)_p modulus.
    MaoRoot { p: f64, inner: Box<Modulus> },
}

impl Modulus {
    pub fn linear(a: f64) -> Self {
        Modulus::Linear { a }
    }

    pub fn log_osgood(delta: f64) -> Self {
        Modulus::LogOsgood { delta, scale: 1.0 }
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            Modulus::Linear { a } => a * u,
            Modulus::Power { c, e } => c * u.powf(*e),
            Modulus::LogOsgood { delta, scale } => {
                if u <= *delta {
                    -scale * u * u.ln()
                } else {
                    let (slope, at) = log_osgood_tangent(*delta);
                    scale * (at + slope * (u - delta))
                }
            }
            Modulus::LogRoot { delta, p, scale } => {
                if u <= *delta {
                    scale * u * (-u.ln()).powf(1.0 / p)
                } else {
                    let (slope, at) = log_root_tangent(*delta, *p);
                    scale * (at + slope * (u - delta))
                }
            }
            Modulus::MaoLift { p, inner } => inner.eval(u.powf(1.0 / p)).powf(*p),
            Modulus::WeakLift { p, inner } => u.powf((p - 1.0) / p) * inner.eval(u.powf(1.0 / p)),
            Modulus::MaoRoot { p, inner } => inner.eval(u.powf(*p)).powf(1.0 / p),
        }
    }

    /// A constant `A` with `ρ(x) ≤ A (x + 1)` for all `x ≥ 0`.
    pub fn linear_constant(&self) -> f64 {
        match self {
            Modulus::Linear { a } => *a,
            Modulus::Power { c, .. } => *c,
            // A concave function lies below its tangent at δ, whose intercept
            // at zero is `ρ(δ) − δ ρ'(δ)`.
            Modulus::LogOsgood { delta, scale } => {
                let (slope, at) = log_osgood_tangent(*delta);
                scale * slope.max(at - slope * delta)
            }
            Modulus::LogRoot { delta, p, scale } => {
                let (slope, at) = log_root_tangent(*delta, *p);
                scale * slope.max(at - slope * delta)
            }
            Modulus::MaoLift { p, inner } => inner.linear_constant().powf(*p) * 2f64.powf(p - 1.0),
            Modulus::WeakLift { inner, .. } => 2.0 * inner.linear_constant(),
            Modulus::MaoRoot { p, inner } => inner.linear_constant().powf(1.0 / p),
        }
    }

    /// Classification of `∫_{0+} du / ρ(u)`.
    pub fn divergence_flag(&self) -> Divergence {
        divergence_test(self, 1.0).unwrap_or(Divergence::Undetermined)
    }

    /// Checks the parameters of the variant.
    pub fn validate(&self) -> Result<(), String> {
        let e_max = (-1f64).exp();
        match self {
            Modulus::Linear { a } if !(*a >= 0.0 && a.is_finite()) => {
                Err(format!("slope must be nonnegative, got {a}"))
            }
            Modulus::Power { c, e } if !(*c >= 0.0 && *e > 0.0 && *e <= 1.0) => Err(format!(
                "power modulus needs c >= 0 and 0 < e <= 1, got c = {c}, e = {e}"
            )),
            Modulus::LogOsgood { delta, scale } | Modulus::LogRoot { delta, scale, .. }
                if !(*delta > 0.0 && *delta < e_max && *scale >= 0.0) =>
            {
                Err(format!(
                    "delta must lie in (0, 1/e) and scale be nonnegative, got delta = {delta}, scale = {scale}"
                ))
            }
            Modulus::LogRoot { p, .. } if !(*p >= 1.0) => Err(format!("p must be at least 1, got {p}")),
            Modulus::MaoLift { p, inner } | Modulus::WeakLift { p, inner } | Modulus::MaoRoot { p, inner } => {
                if !(*p >= 1.0) {
                    return Err(format!("p must be at least 1, got {p}"));
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Slope and value of `u |ln u|` at `δ < 1`.
fn log_osgood_tangent(delta: f64) -> (f64, f64) {
    let l = -delta.ln();
    (l - 1.0, delta * l)
}

/// Slope and value of `u |ln u|^{1/p}` at `δ < 1`.
fn log_root_tangent(delta: f64, p: f64) -> (f64, f64) {
    let l = -delta.ln();
    let r = 1.0 / p;
    (l.powf(r) - r * l.powf(r - 1.0), delta * l.powf(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder() -> Vec<f64> {
        (0..400).map(|j| 1e-12 * 1.1f64.powi(j)).collect()
    }

    fn builtins() -> Vec<Modulus> {
        let d = (-2f64).exp();
        vec![
            Modulus::linear(2.0),
            Modulus::Power { c: 1.5, e: 0.5 },
            Modulus::log_osgood(d),
            Modulus::log_osgood(0.05),
            Modulus::LogRoot {
                delta: d,
                p: 2.0,
                scale: 1.0,
            },
            Modulus::LogRoot {
                delta: d,
                p: 3.0,
                scale: 2f64.sqrt(),
            },
            Modulus::MaoLift {
                p: 2.0,
                inner: Box::new(Modulus::LogRoot {
                    delta: d,
                    p: 2.0,
                    scale: 1.0,
                }),
            },
            Modulus::WeakLift {
                p: 2.0,
                inner: Box::new(Modulus::linear(1.0)),
            },
            Modulus::MaoRoot {
                p: 3.0,
                inner: Box::new(Modulus::linear(2.0)),
            },
        ]
    }

    #[test]
    fn zero_at_zero_and_nondecreasing() {
        for m in builtins() {
            assert_eq!(m.eval(0.0), 0.0, "{m:?}");
            let xs = ladder();
            for w in xs.windows(2) {
                assert!(m.eval(w[1]) >= m.eval(w[0]), "{m:?} at {}", w[1]);
            }
        }
    }

    #[test]
    fn linear_growth_constant_dominates() {
        for m in builtins() {
            let a = m.linear_constant();
            for x in ladder() {
                assert!(m.eval(x) <= a * (x + 1.0) * (1.0 + 1e-12), "{m:?} at {x}");
            }
        }
    }

    #[test]
    fn log_pieces_are_continuous_at_delta() {
        let d = (-2f64).exp();
        for m in [
            Modulus::log_osgood(d),
            Modulus::LogRoot {
                delta: d,
                p: 2.5,
                scale: 1.0,
            },
        ] {
            let below = m.eval(d);
            let above = m.eval(d * (1.0 + 1e-13));
            assert!((below - above).abs() <= 1e-12 * below, "{m:?}");
        }
    }

    #[test]
    fn log_osgood_constant_is_one_at_default_delta() {
        let a = Modulus::log_osgood((-2f64).exp()).linear_constant();
        assert!((a - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mao_lift_inverts_to_inner() {
        let inner = Modulus::LogRoot {
            delta: 0.1,
            p: 2.0,
            scale: 1.0,
        };
        let lift = Modulus::MaoLift {
            p: 2.0,
            inner: Box::new(inner.clone()),
        };
        for v in [1e-6, 0.01, 0.3, 2.0] {
            let back = lift.eval(v * v).powf(0.5);
            assert!((back - inner.eval(v)).abs() < 1e-14 * (1.0 + inner.eval(v)));
        }
    }
}
