use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evenly spaced observation instants `t0 + k * dt` for `k = 1..=k_count`.
///
/// The start time itself is not an observation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    k_count: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, k_count: usize) -> Result<Self> {
        if !t0.is_finite() || t0 < 0.0 {
            return Err(Error::param("t0", format!("must be finite and >= 0, got {t0}")));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::param("dt", format!("must be finite and > 0, got {dt}")));
        }
        if k_count == 0 {
            return Err(Error::param("k_count", "must be >= 1"));
        }
        Ok(Self { t0, dt, k_count })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn k_count(&self) -> usize {
        self.k_count
    }

    /// Time of the `k`-th observation, `k` in `1..=k_count`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Total observed span `K * dt`.
    pub fn duration(&self) -> f64 {
        self.k_count as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.k_count).map(move |k| self.time(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_start_one_step_after_t0() {
        let g = TimeGrid::new(10.0, 10.0, 3).unwrap();
        assert_eq!(g.times().collect::<Vec<_>>(), vec![20.0, 30.0, 40.0]);
        assert_eq!(g.duration(), 30.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 0.0, 1).is_err());
        assert!(TimeGrid::new(-1.0, 1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }
}
