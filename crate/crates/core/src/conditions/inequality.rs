use serde::{Deserialize, Serialize};

use crate::generator::{GProcess, Generator};
use crate::inequalities::Modulus;
use crate::numeric::{dot, norm};

/// Arguments of one sampled inequality. Unused slots repeat their partner
/// (`y2 = y1` for checks in `z`, `z2 = z1` for checks in `y`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: f64,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub b: Vec<f64>,
}

/// Inequalities `lhs ≤ rhs` that the checkers evaluate at sampled points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Inequality {
    /// `⟨û, g(y1,z) − g(y2,z)⟩ ≤ ρ(|y1 − y2|)` with `û` the unit difference.
    OneSided { rho: Modulus },
    /// `|Δy|^{p−1} ⟨û, Δg⟩ ≤ κ(|Δy|^p)`.
    WeakMonotone { p: f64, kappa: Modulus },
    /// `⟨û, Δg⟩ ≤ ϱ(|Δy|^p)^{1/p}`.
    Mao { p: f64, varrho: Modulus },
    /// `|g(y,z1) − g(y,z2)| ≤ λ |z1 − z2|`.
    LipschitzZ { lambda: f64 },
    /// `|g(y,z) − g(y,0)| ≤ γ (g_t + |y| + |z|)^α`.
    SublinearZ {
        gamma: f64,
        alpha: f64,
        g_process: GProcess,
    },
    /// `⟨y, g⟩ ≤ μ|y|² + ν|y||z| + |y| f_t + φ_t`.
    A1 {
        mu: f64,
        nu: f64,
        f: GProcess,
        varphi: GProcess,
    },
    /// `|y|^{p−1} ⟨ŷ, g⟩ ≤ ψ(|y|^p) + ν|y|^{p−1}|z| + |y|^{p−1} f_t`.
    A2 { p: f64, nu: f64, psi: Modulus, f: GProcess },
    /// `⟨ŷ, g⟩ ≤ φ(|y|^p)^{1/p} + ν|z| + f_t`.
    A3 { p: f64, nu: f64, phi: Modulus, f: GProcess },
    /// `|g(y1) − g(y2)| ≤ tol (1 + |g(y1)| + |g(y2)|)`, used on shrunken
    /// segments to detect jumps.
    Continuity { tol: f64 },
}

/// Both sides of an inequality and a magnitude scale for rounding tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub magnitude: f64,
}

impl Inequality {
    /// Evaluates at `x`, or `None` when the point is outside the generator's
    /// domain.
    pub fn sides(&self, g: &dyn Generator, x: &Point) -> Option<Sides> {
        let k = g.dims().k;
        let eval = |y: &[f64], z: &[f64]| {
            let mut out = vec![0.0; k];
            g.eval(x.t, y, z, &x.b, &mut out);
            out
        };
        let inside = |y: &[f64], z: &[f64]| g.in_domain(x.t, y, z, &x.b);
        match self {
            Inequality::OneSided { .. } | Inequality::WeakMonotone { .. } | Inequality::Mao { .. } => {
                if !inside(&x.y1, &x.z1) || !inside(&x.y2, &x.z1) {
                    return None;
                }
                let g1 = eval(&x.y1, &x.z1);
                let g2 = eval(&x.y2, &x.z1);
                let dy: Vec<f64> = x.y1.iter().zip(&x.y2).map(|(a, b)| a - b).collect();
                let r = norm(&dy);
                let mag = norm(&g1) + norm(&g2);
                let inner = if r > 0.0 {
                    dy.iter()
                        .zip(g1.iter().zip(&g2))
                        .map(|(d, (a, b))| d / r * (a - b))
                        .sum()
                } else {
                    0.0
                };
                let (lhs, rhs) = match self {
                    Inequality::OneSided { rho } => (inner, rho.eval(r)),
                    Inequality::WeakMonotone { p, kappa } => (r.powf(p - 1.0) * inner, kappa.eval(r.powf(*p))),
                    Inequality::Mao { p, varrho } => (inner, varrho.eval(r.powf(*p)).powf(1.0 / p)),
                    _ => unreachable!(),
                };
                Some(Sides {
                    lhs,
                    rhs,
                    magnitude: mag
                        * r.powf(match self {
                            Inequality::WeakMonotone { p, .. } => p - 1.0,
                            _ => 0.0,
                        })
                        + rhs.abs(),
                })
            }
            Inequality::LipschitzZ { lambda } => {
                if !inside(&x.y1, &x.z1) || !inside(&x.y1, &x.z2) {
                    return None;
                }
                let g1 = eval(&x.y1, &x.z1);
                let g2 = eval(&x.y1, &x.z2);
                let diff: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
                let dz: Vec<f64> = x.z1.iter().zip(&x.z2).map(|(a, b)| a - b).collect();
                let rhs = lambda * norm(&dz);
                Some(Sides {
                    lhs: norm(&diff),
                    rhs,
                    magnitude: norm(&g1) + norm(&g2) + rhs,
                })
            }
            Inequality::SublinearZ {
                gamma,
                alpha,
                g_process,
            } => {
                let zero = vec![0.0; x.z1.len()];
                if !inside(&x.y1, &x.z1) || !inside(&x.y1, &zero) {
                    return None;
                }
                let g1 = eval(&x.y1, &x.z1);
                let g0 = eval(&x.y1, &zero);
                let diff: Vec<f64> = g1.iter().zip(&g0).map(|(a, b)| a - b).collect();
                let rhs = gamma * (g_process.eval(x.t, &x.b) + norm(&x.y1) + norm(&x.z1)).powf(*alpha);
                Some(Sides {
                    lhs: norm(&diff),
                    rhs,
                    magnitude: norm(&g1) + norm(&g0) + rhs,
                })
            }
            Inequality::A1 { mu, nu, f, varphi } => {
                if !inside(&x.y1, &x.z1) {
                    return None;
                }
                let gv = eval(&x.y1, &x.z1);
                let y = norm(&x.y1);
                let lhs = dot(&x.y1, &gv);
                let rhs = mu * y * y + nu * y * norm(&x.z1) + y * f.eval(x.t, &x.b) + varphi.eval(x.t, &x.b);
                Some(Sides {
                    lhs,
                    rhs,
                    magnitude: y * norm(&gv) + rhs.abs(),
                })
            }
            Inequality::A2 { p, nu, psi, f } | Inequality::A3 { p, nu, phi: psi, f } => {
                if !inside(&x.y1, &x.z1) {
                    return None;
                }
                let gv = eval(&x.y1, &x.z1);
                let y = norm(&x.y1);
                let inner = if y > 0.0 { dot(&x.y1, &gv) / y } else { 0.0 };
                let z = norm(&x.z1);
                let ft = f.eval(x.t, &x.b);
                let (lhs, rhs, w) = if matches!(self, Inequality::A2 { .. }) {
                    let w = y.powf(p - 1.0);
                    (w * inner, psi.eval(y.powf(*p)) + nu * w * z + w * ft, w)
                } else {
                    (inner, psi.eval(y.powf(*p)).powf(1.0 / p) + nu * z + ft, 1.0)
                };
                Some(Sides {
                    lhs,
                    rhs,
                    magnitude: w * norm(&gv) + rhs.abs(),
                })
            }
            Inequality::Continuity { tol } => {
                if !inside(&x.y1, &x.z1) || !inside(&x.y2, &x.z1) {
                    return None;
                }
                let g1 = eval(&x.y1, &x.z1);
                let g2 = eval(&x.y2, &x.z1);
                let diff: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
                Some(Sides {
                    lhs: norm(&diff),
                    rhs: tol * (1.0 + norm(&g1) + norm(&g2)),
                    magnitude: norm(&g1) + norm(&g2),
                })
            }
        }
    }
}
