//! Uniform time grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0, T]` into `steps` intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 steps, got {steps}"
            )));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of stored path values (`steps + 1`).
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.time(k))
    }

    /// Grid index closest to `t`. Fails for times outside `[0, T]`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        if !t.is_finite() || t < -1e-12 || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside grid horizon {}",
                self.horizon
            )));
        }
        let k = (t / self.dt()).round() as usize;
        Ok(k.min(self.steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(f64::NAN, 10).is_err());
    }

    #[test]
    fn times_are_uniform() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        let times: Vec<f64> = g.times().collect();
        assert_eq!(times, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.index_of(1.5).unwrap(), 3);
        assert!(g.index_of(2.5).is_err());
    }
}
