use serde::{Deserialize, Serialize};

use super::modulus::Modulus;
use super::quadrature::integrate;
use crate::error::{Error, Result};

/// Start of the dyadic ladder `ε_j = ε_0 2^{-j}` used by [`divergence_test`].
pub const LADDER_START: f64 = 0.5;
const LADDER_LEN: usize = 48;
const TAIL_WINDOW: usize = 16;
const DIVERGENCE_THRESHOLD: f64 = 1e6;
const CAUCHY_TOL: f64 = 1e-6;
const REL_TOL: f64 = 1e-10;
const BISECTIONS: usize = 60;

fn check_finite_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::MalformedInput(format!(
            "{name} must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

/// `u_0 e^{A τ}`, the Gronwall bound for `u(t) ≤ u_0 + A ∫_t^T u(s) ds`.
pub fn gronwall_bound(u0: f64, a: f64, tau: f64) -> Result<f64> {
    check_finite_nonneg("u0", u0)?;
    check_finite_nonneg("A", a)?;
    check_finite_nonneg("tau", tau)?;
    Ok(u0 * (a * tau).exp())
}

/// `∫_lo^hi du / ρ(u)` for `0 < lo ≤ hi`, computed in the variable `s = ln u`.
fn reciprocal_integral(rho: &Modulus, lo: f64, hi: f64) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let mut singular: Option<(f64, f64)> = None;
    let (v, _) = integrate(
        |s| {
            let u = s.exp();
            let r = rho.eval(u);
            if !(r > 0.0 && r.is_finite()) {
                singular.get_or_insert((u, r));
                return 0.0;
            }
            u / r
        },
        lo.ln(),
        hi.ln(),
        REL_TOL,
    );
    match singular {
        Some((at, value)) => Err(Error::SingularIntegrand { at, value }),
        None => Ok(v),
    }
}

/// `Ψ(x) = ∫_1^x du / ρ(u)`.
pub fn bihari_transform(rho: &Modulus, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::MalformedInput(format!("Bihari transform needs x > 0, got {x}")));
    }
    if x >= 1.0 {
        reciprocal_integral(rho, 1.0, x)
    } else {
        Ok(-reciprocal_integral(rho, x, 1.0)?)
    }
}

/// `Ψ^{-1}(Ψ(u_0) + τ)`, the backward Bihari bound.
///
/// The root is bracketed by doubling, located by bisection on `ln u`, then
/// polished with one Newton step (`Ψ' = 1/ρ`).
pub fn bihari_bound(u0: f64, rho: &Modulus, tau: f64) -> Result<f64> {
    check_finite_nonneg("u0", u0)?;
    check_finite_nonneg("tau", tau)?;
    if u0 == 0.0 {
        return Ok(0.0);
    }
    if tau == 0.0 {
        return Ok(u0);
    }
    let target = bihari_transform(rho, u0)? + tau;
    // Ψ measured from u0: find x with ∫_{u0}^x du/ρ = τ.
    let mut lo = u0;
    let mut acc_lo = 0.0;
    let mut hi = 2.0 * u0;
    let mut acc_hi = reciprocal_integral(rho, lo, hi)?;
    while acc_hi < tau {
        if !(hi * 2.0).is_finite() || hi > 1e300 {
            return Err(Error::RangeOverflow { target, lo, hi });
        }
        lo = hi;
        acc_lo = acc_hi;
        hi *= 2.0;
        acc_hi = acc_lo + reciprocal_integral(rho, lo, hi)?;
    }
    for _ in 0..BISECTIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let acc_mid = acc_lo + reciprocal_integral(rho, lo, mid)?;
        if acc_mid < tau {
            lo = mid;
            acc_lo = acc_mid;
        } else {
            hi = mid;
        }
    }
    let x = lo;
    let polished = x + (tau - acc_lo) * rho.eval(x);
    Ok(if polished >= lo && polished <= hi {
        polished
    } else {
        0.5 * (lo + hi)
    })
}

/// `(m + 2A) x + ρ(2A / (m + 2A))`, the linear envelope of a modulus with
/// linear-growth constant `A`.
pub fn linear_envelope(rho: &Modulus, m: u32, x: f64) -> f64 {
    let a = rho.linear_constant();
    let slope = f64::from(m) + 2.0 * a;
    slope * x + rho.eval(2.0 * a / slope)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Diverges,
    Converges,
    Undetermined,
}

/// Partial integrals of `u^{p̄-1} / ρ(u)^{p̄}` over the dyadic ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceLadder {
    pub pbar: f64,
    /// `∫_{ε_j}^{ε_{j-1}}` for `j = 1..=48`.
    pub increments: Vec<f64>,
    pub partial: f64,
    pub verdict: Divergence,
}

pub fn divergence_ladder(rho: &Modulus, pbar: f64) -> Result<DivergenceLadder> {
    if !(pbar >= 1.0 && pbar.is_finite()) {
        return Err(Error::MalformedInput(format!("pbar must be at least 1, got {pbar}")));
    }
    let mut increments = Vec::with_capacity(LADDER_LEN);
    let mut partial = 0.0;
    let mut upper = LADDER_START;
    let mut verdict = None;
    for _ in 0..LADDER_LEN {
        let lower = upper / 2.0;
        let mut singular: Option<(f64, f64)> = None;
        let (inc, _) = integrate(
            |s| {
                let u = s.exp();
                let r = rho.eval(u);
                if !(r > 0.0 && r.is_finite()) {
                    singular.get_or_insert((u, r));
                    return 0.0;
                }
                // u · u^{p̄-1} / ρ^{p̄} = (u / ρ)^{p̄}
                (u / r).powf(pbar)
            },
            lower.ln(),
            upper.ln(),
            REL_TOL,
        );
        if let Some((at, value)) = singular {
            return Err(Error::SingularIntegrand { at, value });
        }
        increments.push(inc);
        partial += inc;
        upper = lower;
        if partial > DIVERGENCE_THRESHOLD {
            verdict = Some(Divergence::Diverges);
            break;
        }
    }
    let verdict = verdict.unwrap_or_else(|| classify(&increments));
    Ok(DivergenceLadder {
        pbar,
        increments,
        partial,
        verdict,
    })
}

fn classify(inc: &[f64]) -> Divergence {
    let n = inc.len();
    // Increments decaying no faster than 1/j give a divergent series.
    let tail = &inc[n - TAIL_WINDOW..];
    let weighted: Vec<f64> = tail
        .iter()
        .enumerate()
        .map(|(i, v)| (n - TAIL_WINDOW + i + 1) as f64 * v)
        .collect();
    if weighted.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)) && weighted[0] > 0.0 {
        return Divergence::Diverges;
    }
    let last = inc[n - 1];
    let ratio = inc[n - 1] / inc[n - 2];
    if last < CAUCHY_TOL && ratio < 1.0 && last * ratio / (1.0 - ratio) < CAUCHY_TOL {
        return Divergence::Converges;
    }
    Divergence::Undetermined
}

/// Tri-state verdict on `∫_{0+} u^{p̄-1} / ρ(u)^{p̄} du = ∞`.
pub fn divergence_test(rho: &Modulus, pbar: f64) -> Result<Divergence> {
    Ok(divergence_ladder(rho, pbar)?.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gronwall_examples() {
        assert!((gronwall_bound(1.0, 2.0, 0.5).unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(gronwall_bound(0.0, 3.0, 7.0).unwrap(), 0.0);
        assert_eq!(gronwall_bound(2.5, 0.0, 7.0).unwrap(), 2.5);
        assert!(gronwall_bound(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn transform_of_identity_is_log() {
        let rho = Modulus::linear(1.0);
        assert!((bihari_transform(&rho, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(bihari_transform(&rho, 1.0).unwrap(), 0.0);
        assert!((bihari_transform(&rho, 0.5).unwrap() - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn transform_rejects_vanishing_modulus() {
        let rho = Modulus::linear(0.0);
        assert!(matches!(
            bihari_transform(&rho, 2.0),
            Err(Error::SingularIntegrand { .. })
        ));
    }

    #[test]
    fn bound_examples() {
        let rho = Modulus::linear(1.0);
        let b = bihari_bound(0.5, &rho, 1.0).unwrap();
        assert!((b - 0.5 * std::f64::consts::E).abs() < 1e-9);
        assert_eq!(bihari_bound(0.0, &rho, 3.0).unwrap(), 0.0);
        assert_eq!(bihari_bound(0.7, &rho, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn bound_overflow_reports_bracket() {
        // The exact answer e^800 is not a finite double.
        let rho = Modulus::linear(1.0);
        assert!(matches!(
            bihari_bound(1.0, &rho, 800.0),
            Err(Error::RangeOverflow { .. })
        ));
    }

    #[test]
    fn envelope_examples() {
        let rho = Modulus::linear(1.0);
        assert!((linear_envelope(&rho, 6, 2.0) - 16.25).abs() < 1e-15);
        assert!((linear_envelope(&rho, 2, 0.0) - 0.5).abs() < 1e-15);
        assert!((linear_envelope(&rho, 2, 1.0) - (4.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn divergence_closed_forms() {
        assert_eq!(
            divergence_test(&Modulus::linear(1.0), 1.0).unwrap(),
            Divergence::Diverges
        );
        assert_eq!(
            divergence_test(&Modulus::Power { c: 1.0, e: 0.5 }, 1.0).unwrap(),
            Divergence::Converges
        );
        assert_eq!(
            divergence_test(&Modulus::log_osgood((-2f64).exp()), 1.0).unwrap(),
            Divergence::Diverges
        );
    }

    #[test]
    fn divergence_with_pbar() {
        let d = (-2f64).exp();
        let rho = Modulus::LogRoot {
            delta: d,
            p: 2.0,
            scale: 1.0,
        };
        assert_eq!(divergence_test(&rho, 2.0).unwrap(), Divergence::Diverges);
        // u|ln u|² has a convergent reciprocal integral with a slow tail.
        let slow = Modulus::MaoLift {
            p: 2.0,
            inner: Box::new(Modulus::log_osgood(d)),
        };
        assert_eq!(divergence_test(&slow, 1.0).unwrap(), Divergence::Undetermined);
        assert!(divergence_test(&Modulus::linear(1.0), 0.5).is_err());
    }
}
