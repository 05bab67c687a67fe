//! The one-particle initial measure `mu = nu x rho_p` and i.i.d. sampling of
//! N-particle microstates from it.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::torus::{GasMicrostate, TorusPoint, TorusRegion};

/// Spatial marginal of the one-particle measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PositionLaw {
    /// Lebesgue measure restricted to a box and normalised.
    Uniform(TorusRegion),
    /// Every particle starts at the same point.
    PointMass(TorusPoint),
    /// Finite mixture of point masses; weights sum to one.
    Mixture(Vec<(f64, TorusPoint)>),
}

impl PositionLaw {
    pub fn mixture(components: Vec<(f64, TorusPoint)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidMeasure("empty mixture".into()));
        };
        let dim = first.dim();
        if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidMeasure("mixture weights must be finite and >= 0".into()));
        }
        if let Some((_, p)) = components.iter().find(|(_, p)| p.dim() != dim) {
            return Err(Error::Dimension { expected: dim, got: p.dim() });
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("mixture weights sum to {total}")));
        }
        Ok(Self::Mixture(components))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Uniform(r) => r.dim(),
            Self::PointMass(p) => p.dim(),
            Self::Mixture(c) => c[0].1.dim(),
        }
    }

    /// Probability that a position drawn from this law lies in `region`.
    pub fn mass_in(&self, region: &TorusRegion) -> f64 {
        match self {
            Self::Uniform(r) => {
                let overlap: f64 = r
                    .lower()
                    .iter()
                    .zip(r.upper())
                    .zip(region.lower().iter().zip(region.upper()))
                    .map(|((&l1, &u1), (&l2, &u2))| (u1.min(u2) - l1.max(l2)).max(0.0))
                    .product();
                overlap / r.measure()
            }
            Self::PointMass(p) => f64::from(u8::from(region.contains_coords(p.coords()))),
            Self::Mixture(c) => c.iter().filter(|(_, p)| region.contains_coords(p.coords())).map(|(w, _)| w).sum(),
        }
    }
}

/// Piecewise-constant density on a finite grid, used independently for
/// every momentum component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    edges: Vec<f64>,
    /// Probability mass of each bin.
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TabulatedDensity {
    /// `edges` strictly increasing (`m + 1` values), `density` the
    /// non-negative, unnormalised value on each of the `m` bins.
    pub fn new(edges: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || density.len() + 1 != edges.len() {
            return Err(Error::InvalidMeasure("need m+1 edges for m density values".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure("edges must be finite and strictly increasing".into()));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidMeasure("density values must be finite and >= 0".into()));
        }
        let raw: Vec<f64> = edges.windows(2).zip(&density).map(|(w, d)| (w[1] - w[0]) * d).collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("density integrates to zero".into()));
        }
        let masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        cumulative.push(0.0);
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { edges, masses, cumulative })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, p: f64) -> f64 {
        if p <= self.edges[0] {
            return 0.0;
        }
        if p >= *self.edges.last().unwrap() {
            return 1.0;
        }
        let j = self.edges.partition_point(|&e| e <= p) - 1;
        let frac = (p - self.edges[j]) / (self.edges[j + 1] - self.edges[j]);
        self.cumulative[j] + frac * self.masses[j]
    }

    /// Inverse CDF; `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = (self.cumulative.partition_point(|&c| c <= u) - 1).min(self.masses.len() - 1);
        let m = self.masses[j];
        let frac = if m > 0.0 { (u - self.cumulative[j]) / m } else { 0.0 };
        self.edges[j] + frac.clamp(0.0, 1.0) * (self.edges[j + 1] - self.edges[j])
    }

    /// Characteristic function `E[exp(-i b p)]` evaluated exactly bin by bin:
    /// each bin contributes `mass * exp(-i b c) * sinc(b h / 2)`.
    pub fn characteristic(&self, b: f64) -> num_complex::Complex64 {
        self.edges
            .windows(2)
            .zip(&self.masses)
            .map(|(w, &m)| {
                let c = 0.5 * (w[0] + w[1]);
                let half = 0.5 * b * (w[1] - w[0]);
                let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
                num_complex::Complex64::from_polar(m * sinc, -b * c)
            })
            .sum()
    }
}

/// Momentum marginal; every component is drawn independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MomentumLaw {
    /// Centred Gaussian with the same `sigma` on every component.
    Gaussian {
        sigma: f64,
    },
    Tabulated(TabulatedDensity),
}

impl MomentumLaw {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidMeasure(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self::Gaussian { sigma })
    }

    /// Thermal law with the given mean speed in `dim` dimensions.
    pub fn thermal(mean_speed: f64, dim: usize) -> Result<Self> {
        Self::gaussian(sigma_for_mean_speed(mean_speed, dim)?)
    }
}

/// The one-particle measure `mu = nu x rho_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialMeasureSpec {
    pub position: PositionLaw,
    pub momentum: MomentumLaw,
}

impl InitialMeasureSpec {
    pub fn new(position: PositionLaw, momentum: MomentumLaw) -> Self {
        Self { position, momentum }
    }

    pub fn dim(&self) -> usize {
        self.position.dim()
    }
}

/// Per-component Gaussian `sigma` giving `E|p| = mean_speed` in `dim`
/// dimensions, from the chi-distribution mean `sigma * sqrt(2) * G((d+1)/2) / G(d/2)`.
pub fn sigma_for_mean_speed(mean_speed: f64, dim: usize) -> Result<f64> {
    if !(mean_speed.is_finite() && mean_speed > 0.0) {
        return Err(Error::param("mean_speed", format!("must be > 0, got {mean_speed}")));
    }
    let chi_mean = match dim {
        1 => (2.0 / PI).sqrt(),
        2 => (PI / 2.0).sqrt(),
        3 => 2.0 * (2.0 / PI).sqrt(),
        _ => return Err(Error::Unsupported(format!("thermal speed in dimension {dim}"))),
    };
    Ok(mean_speed / chi_mean)
}

/// Draw `n` independent particles from `spec` on the `dim`-torus.
pub fn sample_microstate(
    spec: &InitialMeasureSpec,
    n: usize,
    dim: usize,
    rng: &mut RngStream,
) -> Result<GasMicrostate> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if dim == 0 {
        return Err(Error::param("dim", "must be >= 1"));
    }
    if spec.dim() != dim {
        return Err(Error::Unsupported(format!("{}-d position law sampled in {dim} dimensions", spec.dim())));
    }
    if let PositionLaw::Uniform(r) = &spec.position {
        if r.measure() <= 0.0 {
            return Err(Error::InvalidMeasure("uniform law on a null region".into()));
        }
    }
    let mut positions = Vec::with_capacity(n * dim);
    let mut momenta = Vec::with_capacity(n * dim);
    for _ in 0..n {
        draw_position(&spec.position, rng, &mut positions);
        draw_momentum(&spec.momentum, dim, rng, &mut momenta);
    }
    Ok(GasMicrostate::from_parts_unchecked(dim, positions, momenta))
}

fn draw_position(law: &PositionLaw, rng: &mut RngStream, out: &mut Vec<f64>) {
    match law {
        PositionLaw::Uniform(r) => {
            for (&l, &u) in r.lower().iter().zip(r.upper()) {
                let x = l + (u - l) * rng.uniform();
                // rounding can land exactly on the open end
                out.push(if x >= u { l } else { x });
            }
        }
        PositionLaw::PointMass(p) => out.extend_from_slice(p.coords()),
        PositionLaw::Mixture(components) => {
            let u = rng.uniform();
            let mut acc = 0.0;
            let mut chosen = &components[components.len() - 1].1;
            for (w, p) in components {
                acc += w;
                if u < acc {
                    chosen = p;
                    break;
                }
            }
            out.extend_from_slice(chosen.coords());
        }
    }
}

fn draw_momentum(law: &MomentumLaw, dim: usize, rng: &mut RngStream, out: &mut Vec<f64>) {
    for _ in 0..dim {
        let p = match law {
            MomentumLaw::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            MomentumLaw::Tabulated(t) => t.quantile(rng.uniform()),
        };
        out.push(p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Critical KS distance at significance 0.01.
    fn ks_critical(n: usize) -> f64 {
        1.628 / (n as f64).sqrt()
    }

    fn normal_cdf(x: f64) -> f64 {
        0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
    }

    // Abramowitz-Stegun 7.1.26, |error| < 1.5e-7
    fn erf(x: f64) -> f64 {
        let t = 1.0 / (1.0 + 0.327_591_1 * x.abs());
        let y = 1.0
            - (((((1.061_405_429 * t - 1.453_152_027) * t) + 1.421_413_741) * t - 0.284_496_736) * t + 0.254_829_592)
                * t
                * (-x * x).exp();
        y.copysign(x)
    }

    fn uniform_half() -> InitialMeasureSpec {
        InitialMeasureSpec::new(
            PositionLaw::Uniform(TorusRegion::interval(0.0, 0.5).unwrap()),
            MomentumLaw::gaussian(1.0).unwrap(),
        )
    }

    #[test]
    fn point_mass_positions_coincide() {
        let a0 = TorusPoint::new(vec![0.3, 0.9]).unwrap();
        let spec = InitialMeasureSpec::new(PositionLaw::PointMass(a0.clone()), MomentumLaw::thermal(1.0, 2).unwrap());
        let s = sample_microstate(&spec, 50, 2, &mut RngStream::new(1, 0)).unwrap();
        assert!((0..50).all(|i| s.position(i) == a0.coords()));
    }

    #[test]
    fn uniform_position_mean() {
        let n = 100_000;
        let s = sample_microstate(&uniform_half(), n, 1, &mut RngStream::new(2, 0)).unwrap();
        let mean = s.positions().iter().sum::<f64>() / n as f64;
        let tol = 3.0 * (0.5 / 12f64.sqrt()) / (n as f64).sqrt();
        assert!((mean - 0.25).abs() < tol, "mean {mean}");
    }

    #[test]
    fn gaussian_half_normal_mean() {
        let n = 100_000;
        let sigma = 1.0;
        let s = sample_microstate(&uniform_half(), n, 1, &mut RngStream::new(3, 0)).unwrap();
        let speeds: Vec<f64> = s.momenta().iter().map(|p| p.abs()).collect();
        let mean = speeds.iter().sum::<f64>() / n as f64;
        let var = speeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = sigma * (2.0 / PI).sqrt();
        assert!((mean - expected).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn ks_marginals() {
        let n = 100_000;
        let s = sample_microstate(&uniform_half(), n, 1, &mut RngStream::new(4, 0)).unwrap();
        let d_pos = ks_statistic(s.positions().to_vec(), |x| (x / 0.5).clamp(0.0, 1.0));
        assert!(d_pos < ks_critical(n), "positions D = {d_pos}");
        let d_mom = ks_statistic(s.momenta().to_vec(), normal_cdf);
        assert!(d_mom < ks_critical(n), "momenta D = {d_mom}");
    }

    #[test]
    fn ks_tabulated_momenta() {
        let n = 100_000;
        let table = TabulatedDensity::new(vec![-2.0, -1.0, 0.0, 0.5, 3.0], vec![1.0, 3.0, 2.0, 0.2]).unwrap();
        let spec =
            InitialMeasureSpec::new(PositionLaw::Uniform(TorusRegion::full(1)), MomentumLaw::Tabulated(table.clone()));
        let s = sample_microstate(&spec, n, 1, &mut RngStream::new(5, 0)).unwrap();
        let d = ks_statistic(s.momenta().to_vec(), |p| table.cdf(p));
        assert!(d < ks_critical(n), "D = {d}");
    }

    #[test]
    fn tabulated_characteristic_matches_quadrature() {
        let table = TabulatedDensity::new(vec![-1.0, 0.0, 2.0], vec![2.0, 1.0]).unwrap();
        for b in [0.0, 0.3, 1.7, 9.0] {
            // midpoint rule on the raw density, cell edges aligned with the bins
            let steps = 300_000;
            let (lo, hi) = (-1.0, 2.0);
            let h = (hi - lo) / steps as f64;
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for k in 0..steps {
                let p: f64 = lo + (k as f64 + 0.5) * h;
                let dens = (if p < 0.0 { 2.0 } else { 1.0 }) / 4.0;
                acc += num_complex::Complex64::from_polar(dens * h, -b * p);
            }
            assert!((table.characteristic(b) - acc).norm() < 1e-8, "b = {b}");
        }
    }

    #[test]
    fn mixture_weights_and_frequencies() {
        let a = TorusPoint::new(vec![0.1]).unwrap();
        let b = TorusPoint::new(vec![0.7]).unwrap();
        assert!(PositionLaw::mixture(vec![(0.5, a.clone()), (0.6, b.clone())]).is_err());
        let law = PositionLaw::mixture(vec![(0.25, a), (0.75, b)]).unwrap();
        let spec = InitialMeasureSpec::new(law, MomentumLaw::gaussian(1.0).unwrap());
        let n = 40_000;
        let s = sample_microstate(&spec, n, 1, &mut RngStream::new(6, 0)).unwrap();
        let at_a = s.positions().iter().filter(|&&x| x == 0.1).count() as f64 / n as f64;
        assert!((at_a - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / n as f64).sqrt());
    }

    #[test]
    fn deterministic_per_stream() {
        let a = sample_microstate(&uniform_half(), 1000, 1, &mut RngStream::new(9, 3)).unwrap();
        let b = sample_microstate(&uniform_half(), 1000, 1, &mut RngStream::new(9, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(sample_microstate(&uniform_half(), 10, 2, &mut RngStream::new(0, 0)).is_err());
        assert!(sample_microstate(&uniform_half(), 0, 1, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn sigma_for_mean_speed_examples() {
        assert!((sigma_for_mean_speed(1.0, 1).unwrap() - 1.2533141373155).abs() < 1e-12);
        assert!((sigma_for_mean_speed(2.0, 1).unwrap() - 2.0 * (PI / 2.0).sqrt()).abs() < 1e-12);
        assert!((sigma_for_mean_speed(1.0, 2).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-12);
        assert!(sigma_for_mean_speed(1.0, 4).is_err());
        assert!(sigma_for_mean_speed(0.0, 1).is_err());
    }

    #[test]
    fn thermal_mean_speed_by_monte_carlo() {
        let n = 200_000;
        for dim in 1..=3 {
            let spec = InitialMeasureSpec::new(
                PositionLaw::Uniform(TorusRegion::full(dim)),
                MomentumLaw::thermal(1.0, dim).unwrap(),
            );
            let s = sample_microstate(&spec, n, dim, &mut RngStream::new(11, dim as u64)).unwrap();
            let speeds: Vec<f64> = (0..n).map(|i| s.momentum(i).iter().map(|p| p * p).sum::<f64>().sqrt()).collect();
            let mean = speeds.iter().sum::<f64>() / n as f64;
            let var = speeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - 1.0).abs() < 4.0 * (var / n as f64).sqrt(), "d={dim} mean {mean}");
        }
    }
}
