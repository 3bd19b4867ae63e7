use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time grid `0 = t_0 < ... < t_N = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::MalformedInput("time grid needs at least one step".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::MalformedInput(format!(
                "time grid horizon must be finite and positive, got {horizon}"
            )));
        }
        let dt = horizon / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        times[steps] = horizon;
        Ok(TimeGrid { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::MalformedInput("time grid needs at least one step".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::MalformedInput("time grid must start at 0".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::MalformedInput("time grid contains non-finite times".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MalformedInput("time grid must be strictly increasing".into()));
        }
        Ok(TimeGrid { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_horizon_exactly() {
        let g = TimeGrid::uniform(0.3, 7).unwrap();
        assert_eq!(g.steps(), 7);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.horizon(), 0.3);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::uniform(0.0, 10).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::from_times(vec![0.1, 0.5]).is_err());
    }
}
