//! Expected observables from the Fourier expansion of the free flow, and
//! the probability bounds for single times, time sequences and partitions.
//!
//! For a product law, `E chi_I(x + p t)` factorises over axes; on one axis
//!
//! ```text
//! E = sum_l c_l(I) * nu_hat(l) * rho_hat(2 pi l t),   c_l(I) = int_I exp(i 2 pi l y) dy,
//! ```
//!
//! with `nu_hat(l) = E exp(-i 2 pi l x)` and `rho_hat(b) = E exp(-i b p)`.
//! The `l = 0` term is `|I|`; the others come in conjugate pairs.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csv::{self, CsvTable};
use crate::error::{Error, Result};
use crate::logprob::Bound;
use crate::sampler::{InitialMeasureSpec, MomentumLaw, PositionLaw};
use crate::torus::TorusRegion;

/// Hard cap on the number of Fourier modes summed per axis.
pub const MAX_MODES: u64 = 100_000_000;

/// `c_l = int_a^b exp(i 2 pi l y) dy` for the interval `[a, b)`.
pub fn box_fourier_coeff(a: f64, b: f64, ell: i64) -> Complex64 {
    if ell == 0 {
        return Complex64::new(b - a, 0.0);
    }
    let w = 2.0 * PI * ell as f64;
    let num = Complex64::from_polar(1.0, w * b) - Complex64::from_polar(1.0, w * a);
    num / Complex64::new(0.0, w)
}

/// Characteristic function `rho_hat(b) = E exp(-i b p)` of one momentum component.
pub fn momentum_characteristic(law: &MomentumLaw, b: f64) -> Complex64 {
    match law {
        MomentumLaw::Gaussian { sigma } => Complex64::new((-0.5 * sigma * sigma * b * b).exp(), 0.0),
        MomentumLaw::Tabulated(t) => t.characteristic(b),
    }
}

/// One product component of the position law on a single axis.
#[derive(Debug, Clone, Copy)]
enum AxisLaw {
    Uniform { lo: f64, hi: f64 },
    Point(f64),
}

impl AxisLaw {
    fn transform(self, ell: i64) -> Complex64 {
        match self {
            AxisLaw::Uniform { lo, hi } => box_fourier_coeff(lo, hi, ell).conj() / (hi - lo),
            AxisLaw::Point(x) => Complex64::from_polar(1.0, -2.0 * PI * ell as f64 * x),
        }
    }

    fn mass_in(self, a: f64, b: f64) -> f64 {
        match self {
            AxisLaw::Uniform { lo, hi } => (hi.min(b) - lo.max(a)).max(0.0) / (hi - lo),
            AxisLaw::Point(x) => f64::from(u8::from(a <= x && x < b)),
        }
    }
}

/// Weighted product components of a position law.
fn product_components(law: &PositionLaw) -> Vec<(f64, Vec<AxisLaw>)> {
    match law {
        PositionLaw::Uniform(r) => {
            vec![(1.0, r.lower().iter().zip(r.upper()).map(|(&lo, &hi)| AxisLaw::Uniform { lo, hi }).collect())]
        }
        PositionLaw::PointMass(p) => vec![(1.0, p.coords().iter().map(|&x| AxisLaw::Point(x)).collect())],
        PositionLaw::Mixture(c) => {
            c.iter().map(|(w, p)| (*w, p.coords().iter().map(|&x| AxisLaw::Point(x)).collect())).collect()
        }
    }
}

/// Bound on the sum of `|term_l| + |term_-l|` over all `l >= from`.
fn tail_bound(law: &MomentumLaw, t: f64, from: u64) -> f64 {
    let l = from as f64;
    match law {
        MomentumLaw::Gaussian { sigma } => {
            let a = 2.0 * PI * PI * sigma * sigma * t * t;
            let ratio = (-a * (2.0 * l + 1.0)).exp();
            if ratio >= 1.0 {
                return f64::INFINITY;
            }
            2.0 / (PI * l) * (-a * l * l).exp() / (1.0 - ratio)
        }
        // |sinc(x)| <= 1/|x| on every bin gives |rho_hat(2 pi l t)| <= s / l with
        // s = sum_j m_j / (pi t h_j), and sum_{l >= L} 1/l^2 <= 1/(L - 1).
        MomentumLaw::Tabulated(tab) => {
            let s: f64 = tab.edges().windows(2).zip(tab.masses()).map(|(w, m)| m / (PI * t * (w[1] - w[0]))).sum();
            2.0 / PI * s / (l - 1.0).max(1.0)
        }
    }
}

/// `E chi_[a,b)(x + p t) - (b - a)` on one axis.
fn axis_deviation(axis: AxisLaw, a: f64, b: f64, momentum: &MomentumLaw, t: f64, tol: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(axis.mass_in(a, b) - (b - a));
    }
    if b - a >= 1.0 || b - a <= 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut ell: u64 = 1;
    loop {
        let l = ell as i64;
        let term =
            box_fourier_coeff(a, b, l) * axis.transform(l) * momentum_characteristic(momentum, 2.0 * PI * l as f64 * t);
        sum += 2.0 * term.re;
        ell += 1;
        if tail_bound(momentum, t, ell) < tol {
            break;
        }
        if ell > MAX_MODES {
            return Err(Error::Unsupported(format!(
                "Fourier series at t = {t} needs more than {MAX_MODES} modes for tolerance {tol}"
            )));
        }
    }
    Ok(sum)
}

fn check_inputs(spec: &InitialMeasureSpec, region: &TorusRegion, t: f64, tail_tol: f64) -> Result<()> {
    if spec.dim() != region.dim() {
        return Err(Error::Dimension { expected: spec.dim(), got: region.dim() });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be finite and >= 0, got {t}")));
    }
    if !(tail_tol.is_finite() && tail_tol > 0.0) {
        return Err(Error::param("tail_tol", format!("must be > 0, got {tail_tol}")));
    }
    Ok(())
}

/// `E(chi_{I,t}) - |I|`, summed directly from the non-constant modes so that
/// deviations far below `|I| * 2^-52` are still resolved.
pub fn expected_deviation(spec: &InitialMeasureSpec, region: &TorusRegion, t: f64, tail_tol: f64) -> Result<f64> {
    check_inputs(spec, region, t, tail_tol)?;
    let dim = region.dim();
    let axis_tol = tail_tol / dim as f64;
    let mut total = 0.0;
    for (weight, axes) in product_components(&spec.position) {
        // prod E_k - prod |I_k| = sum_k (prod_{j<k} E_j) dev_k (prod_{j>k} |I_j|)
        let mut devs = Vec::with_capacity(dim);
        for (k, axis) in axes.iter().enumerate() {
            let (a, b) = (region.lower()[k], region.upper()[k]);
            devs.push(axis_deviation(*axis, a, b, &spec.momentum, t, axis_tol)?);
        }
        let widths: Vec<f64> = (0..dim).map(|k| region.upper()[k] - region.lower()[k]).collect();
        let mut component = 0.0;
        for k in 0..dim {
            let before: f64 = (0..k).map(|j| widths[j] + devs[j]).product();
            let after: f64 = widths[k + 1..].iter().product();
            component += before * devs[k] * after;
        }
        total += weight * component;
    }
    Ok(total)
}

/// `E(chi_{I,t})`, the mean fraction of particles in `region` at time `t`.
pub fn expected_fraction(spec: &InitialMeasureSpec, region: &TorusRegion, t: f64, tail_tol: f64) -> Result<f64> {
    let dev = expected_deviation(spec, region, t, tail_tol)?;
    Ok((region.measure() + dev).clamp(0.0, 1.0))
}

/// Power-law control `|E(chi_{I,t}) - |I|| <= c_mu * t^(-2r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub c_mu: f64,
    pub r: f64,
}

impl DecayEstimate {
    pub fn new(c_mu: f64, r: f64) -> Result<Self> {
        if !(c_mu.is_finite() && c_mu >= 0.0) {
            return Err(Error::param("c_mu", format!("must be >= 0, got {c_mu}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::param("r", format!("must be > 0, got {r}")));
        }
        Ok(Self { c_mu, r })
    }

    pub fn bound(&self, t: f64) -> f64 {
        self.c_mu * t.powf(-2.0 * self.r)
    }
}

/// Whether the decay estimate holds at every listed time.
pub fn decay_bound_check(
    spec: &InitialMeasureSpec,
    region: &TorusRegion,
    decay: &DecayEstimate,
    times: &[f64],
    tail_tol: f64,
) -> Result<bool> {
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::param("t_list", format!("times must be positive, got {t}")));
        }
        if expected_deviation(spec, region, t, tail_tol)?.abs() > decay.bound(t) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Fit `c_mu t^(-2r)` to `(t, |deviation|)` samples.
///
/// The slope comes from least squares on `ln|dev|` against `ln t`; the
/// intercept is then raised until the curve dominates every sample, so the
/// result is a valid decay estimate on the fitted range. Zero deviations
/// carry no slope information and are skipped.
pub fn fit_decay(samples: &[(f64, f64)]) -> Result<DecayEstimate> {
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|(t, d)| *t > 0.0 && d.abs() > 0.0).map(|(t, d)| (t.ln(), d.abs().ln())).collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!("{} usable samples, need 2", pts.len())));
    }
    let (slope, _) = least_squares_line(&pts)?;
    if slope >= 0.0 {
        return Err(Error::Fit(format!("deviation does not decay (slope {slope})")));
    }
    let intercept = pts.iter().map(|(x, y)| y - slope * x).fold(f64::NEG_INFINITY, f64::max);
    DecayEstimate::new(intercept.exp(), -slope / 2.0)
}

/// Ordinary least squares `y = slope * x + intercept`.
pub(crate) fn least_squares_line(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Equilibration time `t0(eta) = (c_mu / (eta eps))^(1/(2r))`: the first
/// time at which the mean lies within `eta * eps` of `|I|`.
pub fn equilibration_time(decay: &DecayEstimate, epsilon: f64, eta: f64) -> Result<f64> {
    check_open_unit("epsilon", epsilon)?;
    check_open_unit("eta", eta)?;
    Ok((decay.c_mu / (eta * epsilon)).powf(1.0 / (2.0 * decay.r)))
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in (0,1), got {v}")))
    }
}

/// Two-sided Hoeffding bound for the mean of `n` i.i.d. `[0,1]` variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTail {
    /// `-2 eps^2 N`.
    pub exponent: f64,
    /// `2 exp(-2 eps^2 N)`.
    pub bound: Bound,
}

pub fn hoeffding_tail(epsilon: f64, n: f64) -> Result<HoeffdingTail> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::param("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::param("n", format!("must be >= 1, got {n}")));
    }
    let exponent = -2.0 * epsilon * epsilon * n;
    Ok(HoeffdingTail { exponent, bound: Bound::from_ln(LN_2 + exponent) })
}

/// Number of observation instants in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SequenceLength {
    Count(u64),
    /// The exponentially long `K_N = exp(eps^2 N / 4) / 2`.
    Maximal,
}

/// `ln K_N = eps^2 N / 4 - ln 2`.
pub fn log_k_n(epsilon: f64, n: f64) -> f64 {
    epsilon * epsilon * n / 4.0 - LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParameters {
    pub epsilon: f64,
    pub n: f64,
    pub eta: f64,
    pub k: SequenceLength,
}

impl ScenarioParameters {
    pub fn new(epsilon: f64, n: f64, eta: f64, k: SequenceLength) -> Result<Self> {
        check_open_unit("epsilon", epsilon)?;
        check_open_unit("eta", eta)?;
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::param("n", format!("must be >= 1, got {n}")));
        }
        if k == SequenceLength::Count(0) {
            return Err(Error::param("k_count", "must be >= 1"));
        }
        Ok(Self { epsilon, n, eta, k })
    }

    pub fn log_k(&self) -> f64 {
        match self.k {
            SequenceLength::Count(k) => (k as f64).ln(),
            SequenceLength::Maximal => log_k_n(self.epsilon, self.n),
        }
    }

    /// `t0(eta)` for a given decay estimate.
    pub fn t0(&self, decay: &DecayEstimate) -> Result<f64> {
        equilibration_time(decay, self.epsilon, self.eta)
    }
}

/// Probability of a deviation larger than `eps` at some of the `K`
/// instants after `t0(eta)`: at most `2K exp(-2 (1-eta)^2 eps^2 N)`.
pub fn scenario_bound(params: &ScenarioParameters) -> Bound {
    let ScenarioParameters { epsilon, n, eta, .. } = *params;
    Bound::from_ln(LN_2 + params.log_k() - 2.0 * (1.0 - eta).powi(2) * epsilon * epsilon * n)
}

/// Scenario bound for every cell of an `L`-region partition at once.
pub fn partition_scenario_bound(params: &ScenarioParameters, regions: usize) -> Result<Bound> {
    if regions == 0 {
        return Err(Error::param("L", "must be >= 1"));
    }
    Ok(scenario_bound(params).times(regions as f64))
}

/// Chebyshev-Markov control `4 / (eps^2 N)`, valid once the mean has
/// relaxed to within `eps / 2`; the caller asserts that with `t_large`.
pub fn markov_bound(epsilon: f64, n: f64, t_large: bool) -> Result<Bound> {
    if !t_large {
        return Err(Error::param("t_large", "only valid past the time where the mean is within eps/2"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::param("n", format!("must be >= 1, got {n}")));
    }
    Ok(Bound::from_ln((4.0 / (epsilon * epsilon * n)).ln()))
}

/// Pressure-fluctuation estimate for a gas cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroEstimate {
    pub n: f64,
    pub epsilon: f64,
    /// `-2 eps^2 N`.
    pub exponent: f64,
    /// Hoeffding bound at one instant.
    pub single_time_bound: Bound,
    /// Union over `K` instants.
    pub sequence_bound: Bound,
}

/// `N = n0 * V`, `eps = (v / V) * delta_pi`; single-instant and `K`-instant bounds.
pub fn macro_estimator(
    n0: f64,
    cell_volume: f64,
    sub_volume: f64,
    delta_pi: f64,
    k_count: f64,
) -> Result<MacroEstimate> {
    for (name, v) in [("n0", n0), ("cell_volume", cell_volume), ("sub_volume", sub_volume), ("delta_pi", delta_pi)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("must be > 0, got {v}")));
        }
    }
    if sub_volume >= cell_volume {
        return Err(Error::param("sub_volume", "must be smaller than the cell volume"));
    }
    if !(k_count >= 1.0 && k_count.is_finite()) {
        return Err(Error::param("k_count", format!("must be >= 1, got {k_count}")));
    }
    let n = n0 * cell_volume;
    let epsilon = sub_volume / cell_volume * delta_pi;
    let tail = hoeffding_tail(epsilon, n)?;
    Ok(MacroEstimate {
        n,
        epsilon,
        exponent: tail.exponent,
        single_time_bound: tail.bound,
        sequence_bound: tail.bound.times(k_count),
    })
}

/// Rows of `quantity,log_value,linear_value_or_underflow`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundsReport {
    rows: Vec<(String, f64)>,
}

impl BoundsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, quantity: impl Into<String>, bound: Bound) {
        self.rows.push((quantity.into(), bound.log_value()));
    }

    pub fn rows(&self) -> &[(String, f64)] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(&["quantity", "log_value", "linear_value_or_underflow"]);
        for (q, l) in &self.rows {
            let b = Bound::from_ln(*l);
            let linear = b.linear().map(csv::num).unwrap_or_else(|| "underflow".to_string());
            table.row([q.clone(), csv::num(*l), linear]);
        }
        table.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::TabulatedDensity;
    use crate::torus::TorusPoint;

    fn spec(position: PositionLaw, sigma: f64) -> InitialMeasureSpec {
        InitialMeasureSpec::new(position, MomentumLaw::gaussian(sigma).unwrap())
    }

    fn half() -> TorusRegion {
        TorusRegion::interval(0.0, 0.5).unwrap()
    }

    #[test]
    fn fourier_coefficient_examples() {
        assert_eq!(box_fourier_coeff(0.0, 0.5, 0), Complex64::new(0.5, 0.0));
        assert!((box_fourier_coeff(0.0, 0.5, 1).norm() - 1.0 / PI).abs() < 1e-15);
        for l in [-3, -1, 1, 2, 7] {
            assert!(box_fourier_coeff(0.0, 1.0, l).norm() < 1e-15);
        }
    }

    #[test]
    fn fourier_coefficient_matches_quadrature() {
        let (a, b) = (0.13, 0.71);
        for l in [-4i64, 1, 3] {
            let steps = 100_000;
            let h = (b - a) / steps as f64;
            let q: Complex64 =
                (0..steps).map(|k| Complex64::from_polar(h, 2.0 * PI * l as f64 * (a + (k as f64 + 0.5) * h))).sum();
            assert!((box_fourier_coeff(a, b, l) - q).norm() < 1e-9);
            assert!(box_fourier_coeff(a, b, l).norm() <= 1.0);
        }
    }

    #[test]
    fn uniform_on_torus_is_stationary() {
        let s = spec(PositionLaw::Uniform(TorusRegion::full(1)), 1.0);
        for t in [0.0, 0.01, 0.3, 4.0] {
            assert!((expected_fraction(&s, &half(), t, 1e-12).unwrap() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn initial_value_is_position_mass() {
        let s = spec(PositionLaw::PointMass(TorusPoint::new(vec![0.2]).unwrap()), 1.0);
        assert_eq!(expected_fraction(&s, &half(), 0.0, 1e-10).unwrap(), 1.0);
        let u = spec(PositionLaw::Uniform(TorusRegion::interval(0.25, 0.75).unwrap()), 1.0);
        assert!((expected_fraction(&u, &half(), 0.0, 1e-10).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_positive_time_approaches_initial_value() {
        let s = spec(PositionLaw::PointMass(TorusPoint::new(vec![0.2]).unwrap()), 1.0);
        let e = expected_fraction(&s, &half(), 1e-3, 1e-12).unwrap();
        // the point stays >= 0.2 away from the edges for |p| t < 0.2
        assert!((e - 1.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn long_time_limit_is_measure() {
        let sigma = (PI / 2.0).sqrt();
        let s = spec(PositionLaw::PointMass(TorusPoint::new(vec![0.2]).unwrap()), sigma);
        let t = 5.0 / sigma;
        assert!((expected_fraction(&s, &half(), t, 1e-14).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn halving_tolerance_is_consistent() {
        let s = spec(PositionLaw::PointMass(TorusPoint::new(vec![0.2]).unwrap()), 1.0);
        for t in [0.01, 0.05, 0.3] {
            let mut tol = 1e-4;
            let mut prev = expected_fraction(&s, &half(), t, tol).unwrap();
            for _ in 0..6 {
                let next = expected_fraction(&s, &half(), t, tol / 2.0).unwrap();
                assert!((next - prev).abs() < tol, "t={t} tol={tol}");
                prev = next;
                tol /= 2.0;
            }
        }
    }

    #[test]
    fn point_mass_matches_closed_form_sum() {
        // independent route: P(p t + 0.2 mod 1 in [0, 0.5)) by summing Gaussian
        // interval probabilities over all unfolded copies
        let sigma: f64 = 1.0;
        let t = 0.3;
        let s = spec(PositionLaw::PointMass(TorusPoint::new(vec![0.2]).unwrap()), sigma);
        let scale = sigma * t;
        let phi = |z: f64| 0.5 * erfc(-z / std::f64::consts::SQRT_2);
        let mut direct = 0.0;
        for m in -20..=20 {
            let lo = (m as f64 - 0.2) / scale;
            let hi = (m as f64 + 0.5 - 0.2) / scale;
            direct += phi(hi) - phi(lo);
        }
        let e = expected_fraction(&s, &half(), t, 1e-13).unwrap();
        assert!((e - direct).abs() < 1e-6, "{e} vs {direct}");
    }

    // Numerical Recipes erfc, relative error < 1.2e-7
    fn erfc(x: f64) -> f64 {
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let r = t
            * (-z * z - 1.265_512_23
                + t * (1.000_023_68
                    + t * (0.374_091_96
                        + t * (0.096_784_18
                            + t * (-0.186_288_06
                                + t * (0.278_868_07
                                    + t * (-1.135_203_98
                                        + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
                .exp();
        if x >= 0.0 {
            r
        } else {
            2.0 - r
        }
    }

    #[test]
    fn mixture_is_weighted_sum() {
        let a = TorusPoint::new(vec![0.1]).unwrap();
        let b = TorusPoint::new(vec![0.8]).unwrap();
        let mix = spec(PositionLaw::mixture(vec![(0.3, a.clone()), (0.7, b.clone())]).unwrap(), 0.7);
        let ea = expected_fraction(&spec(PositionLaw::PointMass(a), 0.7), &half(), 0.4, 1e-13).unwrap();
        let eb = expected_fraction(&spec(PositionLaw::PointMass(b), 0.7), &half(), 0.4, 1e-13).unwrap();
        let em = expected_fraction(&mix, &half(), 0.4, 1e-13).unwrap();
        assert!((em - (0.3 * ea + 0.7 * eb)).abs() < 1e-12);
    }

    #[test]
    fn product_regions_factorise() {
        let p2 = TorusPoint::new(vec![0.2, 0.6]).unwrap();
        let s2 = spec(PositionLaw::PointMass(p2), 0.8);
        let box2 = TorusRegion::new(vec![0.0, 0.25], vec![0.5, 0.75]).unwrap();
        let e2 = expected_fraction(&s2, &box2, 0.35, 1e-13).unwrap();
        let ex = expected_fraction(
            &spec(PositionLaw::PointMass(TorusPoint::new(vec![0.2]).unwrap()), 0.8),
            &half(),
            0.35,
            1e-13,
        )
        .unwrap();
        let ey = expected_fraction(
            &spec(PositionLaw::PointMass(TorusPoint::new(vec![0.6]).unwrap()), 0.8),
            &TorusRegion::interval(0.25, 0.75).unwrap(),
            0.35,
            1e-13,
        )
        .unwrap();
        assert!((e2 - ex * ey).abs() < 1e-12);
    }

    #[test]
    fn tabulated_momenta_relax() {
        let table = TabulatedDensity::new(vec![-1.5, -0.5, 0.5, 1.5], vec![1.0, 2.0, 1.0]).unwrap();
        let s = InitialMeasureSpec::new(
            PositionLaw::PointMass(TorusPoint::new(vec![0.2]).unwrap()),
            MomentumLaw::Tabulated(table),
        );
        let early = expected_fraction(&s, &half(), 0.05, 1e-4).unwrap();
        assert!((early - 1.0).abs() < 1e-3, "{early}");
        let late = expected_fraction(&s, &half(), 40.0, 1e-6).unwrap();
        assert!((late - 0.5).abs() < 2e-2, "{late}");
    }

    #[test]
    fn input_validation() {
        let s = spec(PositionLaw::Uniform(half()), 1.0);
        assert!(expected_fraction(&s, &half(), -1.0, 1e-10).is_err());
        assert!(expected_fraction(&s, &half(), 1.0, 0.0).is_err());
        assert!(expected_fraction(&s, &TorusRegion::full(2), 1.0, 1e-10).is_err());
    }

    #[test]
    fn decay_check_examples() {
        let s = spec(PositionLaw::Uniform(half()), 1.0);
        let times = [0.5, 1.0, 2.0, 4.0];
        assert!(decay_bound_check(&s, &half(), &DecayEstimate::new(1.0, 2.0).unwrap(), &times, 1e-14).unwrap());
        assert!(!decay_bound_check(&s, &half(), &DecayEstimate::new(0.0, 1.0).unwrap(), &times, 1e-14).unwrap());
    }

    #[test]
    fn fitted_decay_extrapolates() {
        // slow momenta so the deviation is resolvable across the window
        let s = spec(PositionLaw::Uniform(half()), 0.05);
        let fit_times: Vec<f64> = (0..=18).map(|k| 1.0 + 0.5 * k as f64).collect();
        let samples: Vec<(f64, f64)> =
            fit_times.iter().map(|&t| (t, expected_deviation(&s, &half(), t, 1e-15).unwrap())).collect();
        let decay = fit_decay(&samples).unwrap();
        assert!(decay_bound_check(&s, &half(), &decay, &fit_times, 1e-15).unwrap());
        let later: Vec<f64> = (0..=20).map(|k| 10.0 + 0.5 * k as f64).collect();
        assert!(decay_bound_check(&s, &half(), &decay, &later, 1e-15).unwrap());
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_decay(&[(1.0, 0.1)]).is_err());
        assert!(fit_decay(&[(1.0, 0.1), (2.0, 0.0)]).is_err());
        assert!(fit_decay(&[(1.0, 0.1), (2.0, 0.2)]).is_err());
    }

    #[test]
    fn equilibration_time_matches_half_eta_form() {
        let d = DecayEstimate::new(0.7, 0.8).unwrap();
        let eps: f64 = 0.04;
        let closed_form = eps.powf(-1.0 / (2.0 * d.r)) * (2.0 * d.c_mu).powf(1.0 / (2.0 * d.r));
        let t0 = equilibration_time(&d, eps, 0.5).unwrap();
        assert!((t0 - closed_form).abs() < 1e-12 * closed_form);
        assert!((d.bound(t0) - 0.5 * eps).abs() < 1e-14);
        assert!(equilibration_time(&d, 0.0, 0.5).is_err());
        assert!(equilibration_time(&d, 0.1, 1.0).is_err());
    }

    #[test]
    fn hoeffding_examples() {
        let h = hoeffding_tail(5e-9, 3e19).unwrap();
        assert!((h.exponent + 1500.0).abs() < 1e-12 * 1500.0);
        let v = hoeffding_tail(5e-7, 2e13).unwrap();
        assert!((v.exponent + 10.0).abs() < 1e-12 * 10.0);
        assert!(v.exponent.exp() < 4.54e-5);
        let d = hoeffding_tail(0.01, 2000.0).unwrap();
        let dd = hoeffding_tail(0.01, 4000.0).unwrap();
        assert!((dd.exponent - 2.0 * d.exponent).abs() < 1e-12);
        let zero = hoeffding_tail(0.0, 10.0).unwrap();
        assert_eq!(zero.bound.log_value(), LN_2);
        assert!(zero.bound.is_vacuous());
        assert!(hoeffding_tail(-0.1, 10.0).is_err());
    }

    #[test]
    fn scenario_examples() {
        let (eps, n) = (0.1, 1e4);
        let p = ScenarioParameters::new(eps, n, 0.5, SequenceLength::Maximal).unwrap();
        assert!((scenario_bound(&p).log_value() + eps * eps * n / 4.0).abs() < 1e-12);
        let coef = 2.0 * (1.0f64 - 1e-2).powi(2);
        assert!((coef - 1.96).abs() < 0.001);
        let single = ScenarioParameters::new(0.04, 8000.0, 0.5, SequenceLength::Count(1)).unwrap();
        assert!((scenario_bound(&single).log_value() - (LN_2 - 6.4)).abs() < 1e-12);
    }

    #[test]
    fn partition_examples() {
        let p = ScenarioParameters::new(0.1, 1e4, 0.5, SequenceLength::Maximal).unwrap();
        assert_eq!(partition_scenario_bound(&p, 1).unwrap(), scenario_bound(&p));
        let ten = partition_scenario_bound(&p, 10).unwrap().linear().unwrap();
        assert!((ten / scenario_bound(&p).linear().unwrap() - 10.0).abs() < 1e-12);
        let two = partition_scenario_bound(&p, 2).unwrap();
        assert!((two.log_value() - (-25.0 + LN_2)).abs() < 1e-12);
        assert!(partition_scenario_bound(&p, 0).is_err());
    }

    #[test]
    fn markov_examples() {
        let m = markov_bound(0.04, 1e6, true).unwrap();
        assert!((m.linear().unwrap() - 2.5e-3).abs() < 1e-15);
        let q = markov_bound(0.04, 4e6, true).unwrap();
        assert!((q.linear().unwrap() * 4.0 - m.linear().unwrap()).abs() < 1e-15);
        assert!(markov_bound(0.04, 1e6, false).is_err());
        assert!(markov_bound(0.04, 10.0, true).unwrap().is_vacuous());
    }

    #[test]
    fn hoeffding_beats_markov_past_threshold() {
        // u = eps^2 N; 2 exp(-2u) <= 4/u solved on a grid from u = 5
        for k in 0..200 {
            let u = 5.0 + 0.5 * k as f64;
            let eps = 0.05;
            let n = u / (eps * eps);
            let h = hoeffding_tail(eps, n).unwrap().bound;
            let m = markov_bound(eps, n, true).unwrap();
            assert!(h.log_value() < m.log_value(), "u = {u}");
        }
    }

    #[test]
    fn bounds_are_monotone() {
        let b = |eps, n, k| {
            scenario_bound(&ScenarioParameters::new(eps, n, 0.5, SequenceLength::Count(k)).unwrap()).log_value()
        };
        assert!(b(0.05, 2000.0, 5) > b(0.05, 4000.0, 5));
        assert!(b(0.05, 2000.0, 5) > b(0.06, 2000.0, 5));
        assert!(b(0.05, 2000.0, 5) < b(0.05, 2000.0, 6));
    }

    #[test]
    fn macro_examples() {
        let stp = macro_estimator(3e19, 1.0, 1e-3, 5e-6, 1e32).unwrap();
        assert!((stp.epsilon - 5e-9).abs() < 1e-21);
        assert!((stp.exponent + 1500.0).abs() < 1.5e-9);
        assert!(stp.single_time_bound.log10() < -650.0);
        assert!(stp.sequence_bound.log10() <= 2f64.log10() - 618.0);
        let vac = macro_estimator(2e13, 1.0, 1e-3, 5e-4, 3600.0).unwrap();
        assert!((vac.sequence_bound.linear().unwrap() - 0.33).abs() < 0.005);
        assert!(macro_estimator(1.0, 1.0, 2.0, 1e-3, 1.0).is_err());
    }

    #[test]
    fn report_csv_marks_underflow() {
        let mut r = BoundsReport::new();
        r.push("tiny", Bound::from_ln(-1500.0));
        r.push("half", Bound::from_ln(0.5f64.ln()));
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "quantity,log_value,linear_value_or_underflow");
        assert!(lines[1].ends_with(",underflow"));
        assert!(lines[2].starts_with("half,"));
    }
}
