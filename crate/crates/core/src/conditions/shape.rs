use super::inequality::Point;
use super::report::{SubCheck, Verdict, Witness};
use crate::error::Error;
use crate::inequalities::{divergence_test, Divergence, Modulus};

const TOL: f64 = 1e-12;

fn ladder() -> Vec<f64> {
    (0..=250).map(|j| 1e-12 * 1.2f64.powi(j)).collect()
}

fn modulus_witness(sample: u64, a: f64, b: f64, lhs: f64, rhs: f64) -> Witness {
    Witness {
        sample,
        point: Point {
            t: 0.0,
            y1: vec![a],
            y2: vec![b],
            z1: vec![],
            z2: vec![],
            b: vec![],
        },
        lhs,
        rhs,
        slack: rhs - lhs,
        tolerance: TOL * (1.0 + lhs.abs() + rhs.abs()),
    }
}

/// `ρ(0) = 0`, monotonicity and midpoint concavity on a geometric ladder.
///
/// Witness points carry the ladder arguments in `y1` and `y2`.
pub fn modulus_shape(name: &str, rho: &Modulus) -> SubCheck {
    let xs = ladder();
    let mut worst: Option<Witness> = None;
    let mut keep = |w: Witness| {
        if w.violates() && worst.as_ref().is_none_or(|c| w.slack < c.slack) {
            worst = Some(w);
        }
    };
    let at0 = rho.eval(0.0);
    keep(modulus_witness(0, 0.0, 0.0, at0.abs(), 0.0));
    let mut count = 1u64;
    for (j, w) in xs.windows(2).enumerate() {
        let (a, b) = (rho.eval(w[0]), rho.eval(w[1]));
        keep(modulus_witness(count, w[0], w[1], a, b));
        count += 1;
        for gap in [1usize, 5, 20] {
            if let Some(&hi) = xs.get(j + gap) {
                let lo = w[0];
                let mid = rho.eval(0.5 * (lo + hi));
                let avg = 0.5 * (rho.eval(lo) + rho.eval(hi));
                keep(modulus_witness(count, lo, hi, avg, mid));
                count += 1;
            }
        }
    }
    SubCheck {
        name: name.to_string(),
        verdict: if worst.is_some() { Verdict::Fail } else { Verdict::Pass },
        inequality: None,
        samples: count,
        skipped: 0,
        worst,
        note: Some("rho(0) = 0, nondecreasing and midpoint concave on a geometric ladder from 1e-12".into()),
    }
}

/// `∫_{0+} u^{p̄−1} / ρ(u)^{p̄} du = ∞`.
///
/// A modulus vanishing near zero makes the integrand infinite, which counts as
/// divergence. A convergent integral is reported with the witness
/// `lhs = 1 / partial integral`, `rhs = 0`.
pub fn modulus_divergence(name: &str, rho: &Modulus, pbar: f64) -> SubCheck {
    let (verdict, worst, note) = match divergence_test(rho, pbar) {
        Ok(Divergence::Diverges) => (Verdict::Pass, None, "integral diverges".to_string()),
        Ok(Divergence::Undetermined) => (
            Verdict::Undetermined,
            None,
            "dyadic ladder neither exceeded the divergence threshold nor settled".to_string(),
        ),
        Ok(Divergence::Converges) => {
            let partial = crate::inequalities::divergence_ladder(rho, pbar)
                .map(|l| l.partial)
                .unwrap_or(f64::NAN);
            (
                Verdict::Fail,
                Some(modulus_witness(0, 0.0, 0.0, 1.0 / partial, 0.0)),
                format!("integral converges to about {partial:e}"),
            )
        }
        Err(Error::SingularIntegrand { value: 0.0, at }) => (
            Verdict::Pass,
            None,
            format!("modulus vanishes at {at:e}; integrand is infinite"),
        ),
        Err(e) => (Verdict::Undetermined, None, e.to_string()),
    };
    SubCheck {
        name: name.to_string(),
        verdict,
        inequality: None,
        samples: 48,
        skipped: 0,
        worst,
        note: Some(format!("pbar = {pbar}: {note}")),
    }
}
