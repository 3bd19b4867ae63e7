use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::TimeGrid;
use crate::error::{Error, Result};
use crate::types::Dimensions;

const MAGIC: &[u8; 8] = b"BSDEPB01";

/// Brownian increments and cumulative states for `M` paths on a grid.
///
/// Path `p` is drawn from ChaCha8 stream `p` of the bundle seed, so a path is
/// the same whether the bundle is generated serially or on any number of
/// threads, and a bundle of `M` paths is a prefix of any larger bundle with the
/// same seed.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle {
    grid: TimeGrid,
    dims: Dimensions,
    path_count: usize,
    seed: u64,
    /// `[(step * M + path) * d + component]`
    increments: Vec<f64>,
    /// `[(time * M + path) * d + component]`
    cumulative: Vec<f64>,
}

pub fn simulate_paths(grid: &TimeGrid, dims: Dimensions, path_count: usize, seed: u64) -> Result<PathBundle> {
    if path_count < 2 {
        return Err(Error::MalformedInput(format!(
            "path bundle needs at least 2 paths, got {path_count}"
        )));
    }
    let n = grid.steps();
    let d = dims.d;
    let sd: Vec<f64> = (0..n).map(|i| grid.dt(i).sqrt()).collect();

    // Generate path-major, then transpose into step-major storage.
    let per_path: Vec<Vec<f64>> = (0..path_count)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut out = Vec::with_capacity(n * d);
            for s in &sd {
                for _ in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    out.push(z * s);
                }
            }
            out
        })
        .collect();

    let mut increments = vec![0.0; n * path_count * d];
    for (p, row) in per_path.iter().enumerate() {
        for i in 0..n {
            let dst = (i * path_count + p) * d;
            increments[dst..dst + d].copy_from_slice(&row[i * d..(i + 1) * d]);
        }
    }
    Ok(PathBundle::from_increments(
        grid.clone(),
        dims,
        path_count,
        seed,
        increments,
    ))
}

impl PathBundle {
    fn from_increments(grid: TimeGrid, dims: Dimensions, path_count: usize, seed: u64, increments: Vec<f64>) -> Self {
        let n = grid.steps();
        let d = dims.d;
        let stride = path_count * d;
        let mut cumulative = vec![0.0; (n + 1) * stride];
        for i in 0..n {
            let (done, rest) = cumulative.split_at_mut((i + 1) * stride);
            let prev = &done[i * stride..];
            let next = &mut rest[..stride];
            let inc = &increments[i * stride..(i + 1) * stride];
            for j in 0..stride {
                next[j] = prev[j] + inc[j];
            }
        }
        PathBundle {
            grid,
            dims,
            path_count,
            seed,
            increments,
            cumulative,
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

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// `ΔB` over step `i` on path `p`.
    pub fn increment(&self, i: usize, p: usize) -> &[f64] {
        let d = self.dims.d;
        let at = (i * self.path_count + p) * d;
        &self.increments[at..at + d]
    }

    /// `B_{t_i}` on path `p`.
    pub fn state(&self, i: usize, p: usize) -> &[f64] {
        let d = self.dims.d;
        let at = (i * self.path_count + p) * d;
        &self.cumulative[at..at + d]
    }

    /// All states at time index `i`, path-major.
    pub fn states_at(&self, i: usize) -> &[f64] {
        let stride = self.path_count * self.dims.d;
        &self.cumulative[i * stride..(i + 1) * stride]
    }

    pub fn increments_at(&self, i: usize) -> &[f64] {
        let stride = self.path_count * self.dims.d;
        &self.increments[i * stride..(i + 1) * stride]
    }

    /// The first `m` paths as a bundle of their own.
    pub fn prefix(&self, m: usize) -> Result<PathBundle> {
        if m < 2 || m > self.path_count {
            return Err(Error::MalformedInput(format!(
                "prefix of {m} paths from a bundle of {}",
                self.path_count
            )));
        }
        let d = self.dims.d;
        let n = self.steps();
        let mut inc = Vec::with_capacity(n * m * d);
        for i in 0..n {
            let start = i * self.path_count * d;
            inc.extend_from_slice(&self.increments[start..start + m * d]);
        }
        Ok(PathBundle::from_increments(
            self.grid.clone(),
            self.dims,
            m,
            self.seed,
            inc,
        ))
    }

    /// Flat little-endian layout: magic, `k`, `d`, `N`, `M`, seed (u64 each),
    /// the `N + 1` grid times, then increments ordered by step, path, component.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [
            self.dims.k as u64,
            self.dims.d as u64,
            self.steps() as u64,
            self.path_count as u64,
            self.seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for t in self.grid.times() {
            w.write_all(&t.to_le_bytes())?;
        }
        for x in &self.increments {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::MalformedInput("not a path bundle file".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let k = next_u64(&mut r)? as usize;
        let d = next_u64(&mut r)? as usize;
        let n = next_u64(&mut r)? as usize;
        let m = next_u64(&mut r)? as usize;
        let seed = next_u64(&mut r)?;
        let dims = Dimensions::new(k, d)?;
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };
        let grid = TimeGrid::from_times(read_f64s(n + 1)?)?;
        let increments = read_f64s(n * m * d)?;
        if m < 2 {
            return Err(Error::MalformedInput("path bundle with fewer than 2 paths".into()));
        }
        Ok(PathBundle::from_increments(grid, dims, m, seed, increments))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(d: usize) -> Dimensions {
        Dimensions::new(1, d).unwrap()
    }

    #[test]
    fn terminal_moments_match_standard_normal() {
        let grid = TimeGrid::uniform(1.0, 1).unwrap();
        let m = 100_000;
        let b = simulate_paths(&grid, dims(1), m, 7).unwrap();
        let xs: Vec<f64> = (0..m).map(|p| b.state(1, p)[0]).collect();
        let mean = crate::numeric::mean(&xs);
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
        assert!(mean.abs() < 3.0 / (m as f64).sqrt(), "mean {mean}");
        // Var of the sample variance of N(0,1) is 2/(M-1).
        let se = (2.0 / (m - 1) as f64).sqrt();
        assert!((var - 1.0).abs() < 3.0 * se, "var {var}");
    }

    #[test]
    fn same_seed_same_bytes() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let a = simulate_paths(&grid, dims(2), 50, 99).unwrap();
        let b = simulate_paths(&grid, dims(2), 50, 99).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_binary(&mut ba).unwrap();
        b.write_binary(&mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn different_seeds_differ() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let a = simulate_paths(&grid, dims(1), 10, 1).unwrap();
        let b = simulate_paths(&grid, dims(1), 10, 2).unwrap();
        assert_ne!(a.increment(0, 0), b.increment(0, 0));
    }

    #[test]
    fn worker_count_does_not_change_paths() {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_paths(&grid, dims(2), 300, 5).unwrap());
        let b = four.install(|| simulate_paths(&grid, dims(2), 300, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn cumulative_is_running_sum_and_prefix_is_consistent() {
        let grid = TimeGrid::uniform(2.0, 5).unwrap();
        let b = simulate_paths(&grid, dims(2), 20, 3).unwrap();
        for p in 0..20 {
            assert_eq!(b.state(0, p), &[0.0, 0.0]);
            for i in 0..5 {
                for j in 0..2 {
                    let lhs = b.state(i + 1, p)[j] - b.state(i, p)[j];
                    assert!((lhs - b.increment(i, p)[j]).abs() < 1e-14);
                }
            }
        }
        let pre = b.prefix(7).unwrap();
        let small = simulate_paths(&grid, dims(2), 7, 3).unwrap();
        assert_eq!(pre, small);
    }

    #[test]
    fn binary_round_trip() {
        let grid = TimeGrid::uniform(0.5, 3).unwrap();
        let b = simulate_paths(&grid, Dimensions::new(2, 3).unwrap(), 4, 11).unwrap();
        let mut buf = Vec::new();
        b.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 5 * 8 + 4 * 8 + 3 * 4 * 3 * 8);
        let back = PathBundle::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn rejects_single_path() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        assert!(simulate_paths(&grid, dims(1), 1, 0).is_err());
    }
}
