//! Exact free streaming on the torus and coarse-grained observables.
//!
//! The flow `x -> {x + p t}` is evaluated in closed form; no state is ever
//! mutated. The reduction `x + p*t - floor(x + p*t)` loses about
//! `|p t| * 2^-52` in absolute accuracy, so keep `|p t|` well below `1e9`.

use serde::{Deserialize, Serialize};

use crate::csv::{self, CsvTable};
use crate::error::{Error, Result};
use crate::time::TimeGrid;
use crate::torus::{wrap_unit, GasMicrostate, RegionPartition, TorusPoint, TorusRegion};

#[inline]
pub(crate) fn flow(x: f64, p: f64, t: f64) -> f64 {
    wrap_unit(x + p * t)
}

/// Flat buffer of evolved positions, particle-major.
pub fn evolved_coords(state: &GasMicrostate, t: f64) -> Vec<f64> {
    state.positions().iter().zip(state.momenta()).map(|(&x, &p)| flow(x, p, t)).collect()
}

/// Positions of every particle at time `t`.
pub fn positions_at(state: &GasMicrostate, t: f64) -> Vec<TorusPoint> {
    evolved_coords(state, t)
        .chunks_exact(state.dim())
        .map(|c| TorusPoint::new(c.to_vec()).expect("wrapped coordinates lie in [0,1)"))
        .collect()
}

/// Number of particles in `region` at time `t`.
pub fn count_in(state: &GasMicrostate, t: f64, region: &TorusRegion) -> usize {
    let dim = state.dim();
    if dim == 1 {
        let (lo, hi) = (region.lower()[0], region.upper()[0]);
        return state
            .positions()
            .iter()
            .zip(state.momenta())
            .filter(|(&x, &p)| {
                let y = flow(x, p, t);
                lo <= y && y < hi
            })
            .count();
    }
    let mut buf = vec![0.0; dim];
    (0..state.n())
        .filter(|&i| {
            for ((b, &x), &p) in buf.iter_mut().zip(state.position(i)).zip(state.momentum(i)) {
                *b = flow(x, p, t);
            }
            region.contains_coords(&buf)
        })
        .count()
}

/// The fraction `f_I(X, P, t)` of particles inside `region` at time `t`.
pub fn fraction_in(state: &GasMicrostate, t: f64, region: &TorusRegion) -> f64 {
    count_in(state, t, region) as f64 / state.n() as f64
}

/// Coarse-grained density `rho_alpha = N f_alpha / |I_alpha|` on every cell.
pub fn density_profile(state: &GasMicrostate, t: f64, partition: &RegionPartition) -> Result<Vec<f64>> {
    if let Some(i) = partition.regions().iter().position(|r| r.measure() <= 0.0) {
        return Err(Error::InvalidPartition(format!("region {i} has zero measure")));
    }
    if partition.dim() != state.dim() {
        return Err(Error::Dimension { expected: state.dim(), got: partition.dim() });
    }
    let mut counts = vec![0usize; partition.len()];
    for c in evolved_coords(state, t).chunks_exact(state.dim()) {
        if let Some(a) = partition.locate(c) {
            counts[a] += 1;
        }
    }
    Ok(counts.iter().zip(partition.regions()).map(|(&c, r)| c as f64 / r.measure()).collect())
}

/// Evolve for `t_reverse` and flip every momentum: `(X + P T, -P)`.
pub fn reverse_at(state: &GasMicrostate, t_reverse: f64) -> GasMicrostate {
    let momenta = state.momenta().iter().map(|p| -p).collect();
    GasMicrostate::from_parts_unchecked(state.dim(), evolved_coords(state, t_reverse), momenta)
}

/// All `n` particles at `x0` with common momentum `p0`: a periodic orbit.
pub fn zermelo_state(n: usize, x0: &TorusPoint, p0: &[f64]) -> Result<GasMicrostate> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if p0.len() != x0.dim() {
        return Err(Error::Dimension { expected: x0.dim(), got: p0.len() });
    }
    if p0.iter().all(|&p| p == 0.0) {
        return Err(Error::param("p0", "momentum must be nonzero"));
    }
    let positions = x0.coords().repeat(n);
    let momenta = p0.repeat(n);
    GasMicrostate::new(x0.dim(), positions, momenta)
}

/// `f_I` sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::param("values", "one value per time required"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("times", "must be strictly increasing"));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sample mean and (n-1)-normalised standard deviation of the values.
    pub fn mean_std(&self) -> (f64, f64) {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let var = self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    }

    /// Header `t,f`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(&["t", "f"]);
        for (&t, &f) in self.times.iter().zip(&self.values) {
            table.row([csv::num(t), csv::num(f)]);
        }
        table.finish()
    }
}

/// `fraction_in` at every grid time.
pub fn trace(state: &GasMicrostate, region: &TorusRegion, grid: &TimeGrid) -> ObservableSeries {
    let times: Vec<f64> = grid.times().collect();
    let values = times.iter().map(|&t| fraction_in(state, t, region)).collect();
    ObservableSeries { times, values }
}
