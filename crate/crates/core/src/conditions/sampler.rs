use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inequality::{Point, Sides};
use super::report::Witness;
use crate::error::{Error, Result};
use crate::types::Dimensions;

const SHARD: u64 = 2048;

/// Sample clouds for the assumption checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub samples: u64,
    pub seed: u64,
    /// Times are drawn uniformly from `(0, t_max]`.
    pub t_max: f64,
    /// Each coordinate block is multiplied by one of these, chosen per draw.
    pub scales: Vec<f64>,
    /// Probability of drawing a block from Student-t(3) instead of a Gaussian.
    pub heavy_tail_prob: f64,
    /// Relative rounding allowance: a sample violates when
    /// `rhs − lhs < −slack_rel_tol · (1 + magnitude)`.
    pub slack_rel_tol: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 100_000,
            seed: 1,
            t_max: 1.0,
            scales: vec![0.01, 1.0, 100.0],
            heavy_tail_prob: 0.5,
            slack_rel_tol: 1e-9,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Configuration(m));
        if self.samples == 0 {
            return bad("sampler needs at least one sample".into());
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad(format!("scales must be positive and finite, got {:?}", self.scales));
        }
        if !(0.0..=1.0).contains(&self.heavy_tail_prob) {
            return bad(format!(
                "heavy_tail_prob must lie in [0, 1], got {}",
                self.heavy_tail_prob
            ));
        }
        if !(self.slack_rel_tol >= 0.0) {
            return bad(format!("slack_rel_tol must be nonnegative, got {}", self.slack_rel_tol));
        }
        Ok(())
    }
}

/// Which arguments of a [`Point`] vary in a cloud.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cloud {
    /// `y1 ≠ y2`, one `z`.
    YPair,
    /// `z1 ≠ z2`, one `y`.
    ZPair,
    /// A single `(y, z)`.
    Single,
    /// Like `YPair`, drawn from a separate stream for jump detection.
    Continuity,
}

impl Cloud {
    fn salt(self) -> u64 {
        match self {
            Cloud::YPair => 1,
            Cloud::ZPair => 2,
            Cloud::Single => 3,
            Cloud::Continuity => 4,
        }
    }
}

fn block(rng: &mut ChaCha8Rng, cfg: &SamplerConfig, len: usize, t3: &StudentT<f64>) -> Vec<f64> {
    let scale = cfg.scales[rng.random_range(0..cfg.scales.len())];
    let heavy = rng.random::<f64>() < cfg.heavy_tail_prob;
    (0..len)
        .map(|_| {
            let x: f64 = if heavy {
                t3.sample(rng)
            } else {
                StandardNormal.sample(rng)
            };
            scale * x
        })
        .collect()
}

/// The `index`-th point of a cloud. Points depend only on the seed, the cloud
/// kind and the index.
pub fn draw(cfg: &SamplerConfig, dims: Dimensions, cloud: Cloud, index: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((cloud.salt() << 56) | index);
    let t3 = StudentT::new(3.0).expect("three degrees of freedom");
    let t = cfg.t_max * (1.0 - rng.random::<f64>());
    let sd = t.sqrt();
    let b: Vec<f64> = (0..dims.d)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            sd * x
        })
        .collect();
    let y1 = block(&mut rng, cfg, dims.k, &t3);
    let z1 = block(&mut rng, cfg, dims.kd(), &t3);
    let (y2, z2) = match cloud {
        Cloud::YPair | Cloud::Continuity => {
            let dy = block(&mut rng, cfg, dims.k, &t3);
            (y1.iter().zip(&dy).map(|(a, b)| a + b).collect(), z1.clone())
        }
        Cloud::ZPair => {
            let dz = block(&mut rng, cfg, dims.kd(), &t3);
            (y1.clone(), z1.iter().zip(&dz).map(|(a, b)| a + b).collect())
        }
        Cloud::Single => (y1.clone(), z1.clone()),
    };
    Point { t, y1, y2, z1, z2, b }
}

/// Outcome of evaluating an inequality over a cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudResult {
    pub samples: u64,
    pub skipped: u64,
    pub violations: u64,
    /// Smallest normalized slack, ties broken by the lower sample index.
    pub worst: Option<Witness>,
}

#[derive(Default)]
struct Partial {
    skipped: u64,
    violations: u64,
    worst: Option<(f64, Witness)>,
    bad: Vec<u64>,
}

fn better(a: &(f64, Witness), b: &(f64, Witness)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1.sample < b.1.sample)
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.skipped += other.skipped;
        self.violations += other.violations;
        self.worst = match (self.worst, other.worst) {
            (Some(a), Some(b)) => Some(if better(&b, &a) { b } else { a }),
            (a, b) => a.or(b),
        };
        self.bad.extend(other.bad);
        self
    }
}

/// Builds a witness from evaluated sides.
pub fn witness(cfg: &SamplerConfig, sample: u64, point: Point, s: Sides) -> Witness {
    Witness {
        sample,
        point,
        lhs: s.lhs,
        rhs: s.rhs,
        slack: s.rhs - s.lhs,
        tolerance: cfg.slack_rel_tol * (1.0 + s.magnitude),
    }
}

/// Evaluates `eval` at every point of a cloud, in parallel shards.
///
/// `eval` returns `None` for points outside the generator's domain. It may
/// move the point, for example to the end of a bisection, and the witness
/// records the moved point. A point
/// inside the domain with a non-finite side is a contamination error.
pub fn run_cloud<F>(cfg: &SamplerConfig, dims: Dimensions, cloud: Cloud, what: &str, eval: F) -> Result<CloudResult>
where
    F: Fn(&mut Point) -> Option<Sides> + Sync,
{
    cfg.validate()?;
    let shards = cfg.samples.div_ceil(SHARD);
    let total = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut part = Partial::default();
            for i in s * SHARD..((s + 1) * SHARD).min(cfg.samples) {
                let mut point = draw(cfg, dims, cloud, i);
                let Some(sides) = eval(&mut point) else {
                    part.skipped += 1;
                    continue;
                };
                if !(sides.lhs.is_finite() && sides.rhs.is_finite() && sides.magnitude.is_finite()) {
                    part.bad.push(i);
                    continue;
                }
                let w = witness(cfg, i, point, sides);
                if w.violates() {
                    part.violations += 1;
                }
                let normalized = w.slack / (1.0 + sides.magnitude);
                let cand = (normalized, w);
                if part.worst.as_ref().is_none_or(|cur| better(&cand, cur)) {
                    part.worst = Some(cand);
                }
            }
            part
        })
        .reduce(Partial::default, Partial::merge);
    if !total.bad.is_empty() {
        let mut bad = total.bad;
        bad.sort_unstable();
        return Err(Error::contamination(
            format!("{what} (sample indices)"),
            bad.into_iter().map(|i| (0, i as usize)).collect(),
        ));
    }
    Ok(CloudResult {
        samples: cfg.samples,
        skipped: total.skipped,
        violations: total.violations,
        worst: total.worst.map(|(_, w)| w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible_and_distinct() {
        let cfg = SamplerConfig::default();
        let dims = Dimensions::new(2, 3).unwrap();
        let a = draw(&cfg, dims, Cloud::YPair, 17);
        assert_eq!(a, draw(&cfg, dims, Cloud::YPair, 17));
        assert_ne!(a, draw(&cfg, dims, Cloud::YPair, 18));
        assert_ne!(a, draw(&cfg, dims, Cloud::ZPair, 17));
        assert_eq!(a.y1.len(), 2);
        assert_eq!(a.z1.len(), 6);
        assert_eq!(a.b.len(), 3);
        assert!(a.t > 0.0 && a.t <= 1.0);
        let z = draw(&cfg, dims, Cloud::ZPair, 3);
        assert_eq!(z.y1, z.y2);
    }

    #[test]
    fn cloud_reduction_does_not_depend_on_thread_count() {
        let cfg = SamplerConfig {
            samples: 10_000,
            ..SamplerConfig::default()
        };
        let dims = Dimensions::new(1, 1).unwrap();
        let eval = |p: &mut Point| {
            Some(Sides {
                lhs: p.y1[0],
                rhs: 0.0,
                magnitude: 0.0,
            })
        };
        let many = run_cloud(&cfg, dims, Cloud::Single, "test", eval).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| run_cloud(&cfg, dims, Cloud::Single, "test", eval).unwrap());
        assert_eq!(many, one);
        assert!(many.violations > 0);
    }

    #[test]
    fn contamination_is_reported() {
        let cfg = SamplerConfig {
            samples: 100,
            ..SamplerConfig::default()
        };
        let dims = Dimensions::new(1, 1).unwrap();
        let err = run_cloud(&cfg, dims, Cloud::Single, "g", |_: &mut Point| {
            Some(Sides {
                lhs: f64::NAN,
                rhs: 0.0,
                magnitude: 0.0,
            })
        })
        .unwrap_err();
        assert!(matches!(err, Error::NumericContamination { count: 100, .. }));
    }
}
