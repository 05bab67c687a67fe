//! Deterministic parallel Monte Carlo experiments.
//!
//! Every history draws from its own [`RngStream`] and contributes integer
//! counts only, so results are identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{least_squares_line, scenario_bound, ScenarioParameters, SequenceLength};
use crate::csv::{self, CsvTable};
use crate::error::{Error, Result};
use crate::gas::{self, ObservableSeries};
use crate::kac::{sample_markers, KacConfiguration};
use crate::logprob::Bound;
use crate::rng::RngStream;
use crate::sampler::{sample_microstate, InitialMeasureSpec};
use crate::time::TimeGrid;
use crate::torus::TorusRegion;

/// Stream ids of successive particle counts are spaced this far apart.
const STREAM_BLOCK: u64 = 1 << 40;

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return Err(Error::param("workers", "must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingExperimentSpec {
    pub n_values: Vec<usize>,
    /// Histories `M` per particle count.
    pub histories: u64,
    pub epsilon: f64,
    /// Observation instants; `grid.k_count()` is the largest `K`.
    pub grid: TimeGrid,
    /// Sequence lengths to report, each in `1..=grid.k_count()`.
    pub k_values: Vec<usize>,
    pub region: TorusRegion,
    pub initial: InitialMeasureSpec,
    pub master_seed: u64,
    /// Only particle counts `>= fit_min_n` enter the exponential fit.
    pub fit_min_n: usize,
    pub fit_weighting: FitWeighting,
}

impl ScalingExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.windows(2).any(|w| w[0] >= w[1]) || self.n_values[0] == 0 {
            return Err(Error::param("n_values", "must be non-empty, positive and strictly increasing"));
        }
        if self.histories == 0 {
            return Err(Error::param("histories", "must be >= 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be > 0, got {}", self.epsilon)));
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| k == 0 || k > self.grid.k_count()) {
            return Err(Error::param("k_values", format!("each K must lie in 1..={}", self.grid.k_count())));
        }
        if self.initial.dim() != self.region.dim() {
            return Err(Error::Dimension { expected: self.region.dim(), got: self.initial.dim() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub k: usize,
    pub deviations: u64,
    pub histories: u64,
    pub p_hat: f64,
    pub p_hat_over_k: f64,
    pub standard_error: f64,
}

/// `P(N) / K = a exp(-b eps^2 N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a: f64,
    pub b: f64,
    /// Points dropped because their probability was zero.
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitWeighting {
    Unweighted,
    /// Weight each point by its deviation count, the inverse variance of `ln p_hat`.
    InverseVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub epsilon: f64,
    pub rows: Vec<ScalingRow>,
    pub fit: Option<ExponentialFit>,
}

impl ScalingResult {
    /// Header `N,K,deviations,M,p_hat,p_hat_over_K,stderr`.
    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(&["N", "K", "deviations", "M", "p_hat", "p_hat_over_K", "stderr"]);
        for r in &self.rows {
            table.row([
                r.n.to_string(),
                r.k.to_string(),
                r.deviations.to_string(),
                r.histories.to_string(),
                csv::num(r.p_hat),
                csv::num(r.p_hat_over_k),
                csv::num(r.standard_error),
            ]);
        }
        table.finish()
    }

    /// Sequence bound `2 exp(-eps^2 N / 2)` on `p_hat / K` at a given `N`.
    pub fn normalised_bound(&self, n: usize) -> Result<Bound> {
        let p = ScenarioParameters::new(self.epsilon, n as f64, 0.5, SequenceLength::Count(1))?;
        Ok(scenario_bound(&p))
    }

    /// Per-`N` average of `p_hat / K` over the reported `K` values.
    pub fn k_averaged(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some(last) if last.0 == r.n => {
                    last.1 += r.p_hat_over_k;
                    last.2 += 1;
                }
                _ => out.push((r.n, r.p_hat_over_k, 1)),
            }
        }
        out.into_iter().map(|(n, s, c)| (n, s / c as f64)).collect()
    }
}

/// For each history, the first grid index at which `|f_I - |I|| >= eps`.
///
/// Ties at exactly `eps` count as deviations; the comparison is done on
/// particle counts with a relative slack of `1e-12` against rounding.
pub fn run_gas_scaling(spec: &ScalingExperimentSpec, workers: usize) -> Result<ScalingResult> {
    spec.validate()?;
    let pool = pool(workers)?;
    let k_max = *spec.k_values.iter().max().expect("validated non-empty");
    let times: Vec<f64> = spec.grid.times().take(k_max).collect();
    let measure = spec.region.measure();
    let dim = spec.region.dim();
    let mut rows = Vec::new();
    for (idx, &n) in spec.n_values.iter().enumerate() {
        let threshold = spec.epsilon * n as f64 * (1.0 - 1e-12);
        let centre = measure * n as f64;
        let first_hits = pool.install(|| {
            (0..spec.histories)
                .into_par_iter()
                .map(|h| -> Result<Option<usize>> {
                    let mut rng = RngStream::new(spec.master_seed, idx as u64 * STREAM_BLOCK + h);
                    let state = sample_microstate(&spec.initial, n, dim, &mut rng)?;
                    Ok(times
                        .iter()
                        .position(|&t| (gas::count_in(&state, t, &spec.region) as f64 - centre).abs() >= threshold))
                })
                .try_fold(
                    || vec![0u64; k_max],
                    |mut acc, hit| {
                        if let Some(k) = hit? {
                            acc[k] += 1;
                        }
                        Ok::<_, Error>(acc)
                    },
                )
                .try_reduce(|| vec![0u64; k_max], |a, b| Ok(add_counts(a, b)))
        })?;
        let mut ks = spec.k_values.clone();
        ks.sort_unstable();
        ks.dedup();
        for k in ks {
            let deviations: u64 = first_hits[..k].iter().sum();
            let m = spec.histories as f64;
            let p_hat = deviations as f64 / m;
            rows.push(ScalingRow {
                n,
                k,
                deviations,
                histories: spec.histories,
                p_hat,
                p_hat_over_k: p_hat / k as f64,
                standard_error: (p_hat * (1.0 - p_hat) / m).sqrt(),
            });
        }
    }
    let mut result = ScalingResult { epsilon: spec.epsilon, rows, fit: None };
    let fit_rows: Vec<&ScalingRow> = result.rows.iter().filter(|r| r.n >= spec.fit_min_n).collect();
    let points: Vec<(f64, f64, f64)> = result
        .k_averaged()
        .into_iter()
        .filter(|(n, _)| *n >= spec.fit_min_n)
        .map(|(n, p)| {
            let count: u64 = fit_rows.iter().filter(|r| r.n == n).map(|r| r.deviations).sum();
            (n as f64, p, count as f64)
        })
        .collect();
    result.fit = fit_exponential_weighted(&points, spec.epsilon, spec.fit_weighting).ok();
    Ok(result)
}

/// Unweighted least squares of `ln p = ln a - b eps^2 N`.
pub fn fit_exponential(points: &[(f64, f64)], epsilon: f64) -> Result<ExponentialFit> {
    let pts: Vec<(f64, f64, f64)> = points.iter().map(|&(n, p)| (n, p, 1.0)).collect();
    fit_exponential_weighted(&pts, epsilon, FitWeighting::Unweighted)
}

/// Points are `(N, p, weight)`; the weight is used only for
/// [`FitWeighting::InverseVariance`].
pub fn fit_exponential_weighted(
    points: &[(f64, f64, f64)],
    epsilon: f64,
    weighting: FitWeighting,
) -> Result<ExponentialFit> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    let usable: Vec<&(f64, f64, f64)> = points.iter().filter(|p| p.1 > 0.0).collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 2 {
        return Err(Error::Fit(format!("{} points with p > 0, need 2", usable.len())));
    }
    let e2 = epsilon * epsilon;
    let (slope, intercept) = match weighting {
        FitWeighting::Unweighted => {
            let xy: Vec<(f64, f64)> = usable.iter().map(|p| (e2 * p.0, p.1.ln())).collect();
            least_squares_line(&xy)?
        }
        FitWeighting::InverseVariance => {
            let sw: f64 = usable.iter().map(|p| p.2).sum();
            if !(sw > 0.0) {
                return Err(Error::Fit("weights sum to zero".into()));
            }
            let mx = usable.iter().map(|p| p.2 * e2 * p.0).sum::<f64>() / sw;
            let my = usable.iter().map(|p| p.2 * p.1.ln()).sum::<f64>() / sw;
            let sxx: f64 = usable.iter().map(|p| p.2 * (e2 * p.0 - mx).powi(2)).sum();
            let sxy: f64 = usable.iter().map(|p| p.2 * (e2 * p.0 - mx) * (p.1.ln() - my)).sum();
            if sxx == 0.0 {
                return Err(Error::Fit("all abscissae coincide".into()));
            }
            let slope = sxy / sxx;
            (slope, my - slope * mx)
        }
    };
    Ok(ExponentialFit { a: intercept.exp(), b: -slope, excluded })
}

/// One sampled microstate traced over the grid.
pub fn run_fluctuation_trace(
    n: usize,
    initial: &InitialMeasureSpec,
    region: &TorusRegion,
    grid: &TimeGrid,
    seed: u64,
) -> Result<ObservableSeries> {
    let state = sample_microstate(initial, n, region.dim(), &mut RngStream::new(seed, 0))?;
    Ok(gas::trace(&state, region, grid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacEnsembleSpec {
    pub n: usize,
    pub mu: f64,
    pub histories: u64,
    pub t_max: u64,
    pub epsilon: f64,
    /// Count histories leaving `|Delta / N| <= eps` anywhere in this window.
    pub window: Option<(u64, u64)>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KacEnsembleRow {
    pub t: u64,
    pub mean: f64,
    pub variance: f64,
    pub p_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacEnsembleResult {
    pub histories: u64,
    pub rows: Vec<KacEnsembleRow>,
    pub window: Option<(u64, u64)>,
    pub window_violations: u64,
    /// Histories with `Delta(N) != (-1)^m Delta(0)`; only checked when `t_max >= N`.
    pub half_period_mismatches: u64,
}

impl KacEnsembleResult {
    /// Header `t,mean,variance,p_dev,M`.
    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(&["t", "mean", "variance", "p_dev", "M"]);
        for r in &self.rows {
            table.row([
                r.t.to_string(),
                csv::num(r.mean),
                csv::num(r.variance),
                csv::num(r.p_dev),
                self.histories.to_string(),
            ]);
        }
        table.finish()
    }

    pub fn window_fraction(&self) -> f64 {
        self.window_violations as f64 / self.histories as f64
    }

    /// Header `t_from,t_to,violations,M,fraction`.
    pub fn window_csv(&self) -> String {
        let mut table = CsvTable::new(&["t_from", "t_to", "violations", "M", "fraction"]);
        if let Some((a, b)) = self.window {
            table.row([
                a.to_string(),
                b.to_string(),
                self.window_violations.to_string(),
                self.histories.to_string(),
                csv::num(self.window_fraction()),
            ]);
        }
        table.finish()
    }
}

#[derive(Clone)]
struct KacTally {
    sum: Vec<i128>,
    sum_sq: Vec<i128>,
    dev: Vec<u64>,
    window: u64,
    half_period: u64,
}

impl KacTally {
    fn new(len: usize) -> Self {
        Self { sum: vec![0; len], sum_sq: vec![0; len], dev: vec![0; len], window: 0, half_period: 0 }
    }

    fn merge(mut self, other: Self) -> Self {
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
            self.dev[i] += other.dev[i];
        }
        self.window += other.window;
        self.half_period += other.half_period;
        self
    }
}

/// Sample `M` marker sequences, evolve each from all white and tally
/// `Delta(t) / N` for `t = 0..=t_max`.
pub fn run_kac_ensemble(spec: &KacEnsembleSpec, workers: usize) -> Result<KacEnsembleResult> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if spec.histories == 0 {
        return Err(Error::param("histories", "must be >= 1"));
    }
    if spec.t_max > 2 * n as u64 {
        return Err(Error::param("t_max", format!("must be <= 2N = {}", 2 * n)));
    }
    if !(spec.epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    if let Some((a, b)) = spec.window {
        if a > b || b > spec.t_max {
            return Err(Error::param("window", format!("[{a}, {b}] must lie inside [0, t_max]")));
        }
    }
    let pool = pool(workers)?;
    let len = spec.t_max as usize + 1;
    let limit = spec.epsilon * n as f64;
    let tally = pool.install(|| {
        (0..spec.histories)
            .into_par_iter()
            .map(|h| -> Result<KacTally> {
                let mut rng = RngStream::new(spec.master_seed, h);
                let markers = sample_markers(n, spec.mu, &mut rng)?;
                let parity = markers.count() % 2;
                let mut config = KacConfiguration::all_white(markers);
                let mut one = KacTally::new(len);
                for t in 0..len {
                    if t > 0 {
                        config.advance();
                    }
                    let d = config.delta();
                    one.sum[t] = d as i128;
                    one.sum_sq[t] = (d as i128) * (d as i128);
                    let out = (d as f64).abs() > limit;
                    one.dev[t] = u64::from(out);
                    if let Some((a, b)) = spec.window {
                        if out && (a..=b).contains(&(t as u64)) {
                            one.window = 1;
                        }
                    }
                    if t == n {
                        let expected = if parity == 0 { n as i64 } else { -(n as i64) };
                        one.half_period = u64::from(d != expected);
                    }
                }
                Ok(one)
            })
            .try_reduce(|| KacTally::new(len), |a, b| Ok(a.merge(b)))
    })?;
    let m = spec.histories as f64;
    let nn = n as f64;
    let rows = (0..len)
        .map(|t| {
            let s = tally.sum[t] as f64;
            let ss = tally.sum_sq[t] as f64;
            let mean = s / m / nn;
            let variance = if spec.histories > 1 { (ss - s * s / m) / (m - 1.0) / (nn * nn) } else { 0.0 };
            KacEnsembleRow { t: t as u64, mean, variance: variance.max(0.0), p_dev: tally.dev[t] as f64 / m }
        })
        .collect();
    Ok(KacEnsembleResult {
        histories: spec.histories,
        rows,
        window: spec.window,
        window_violations: tally.window,
        half_period_mismatches: tally.half_period,
    })
}
