//! Python bindings: `import kacgas`.
//!
//! Laws and regions use the same text syntax as the command-line config,
//! e.g. `Region("0:0.5")`, `InitialMeasure("uniform:0:0.5", "thermal:1")`.

use std::fmt::Display;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kacgas::analytic;
use kacgas::cli;
use kacgas::ensemble::{self, FitWeighting, KacEnsembleSpec, ScalingExperimentSpec};
use kacgas::gas;
use kacgas::kac;
use kacgas::sampler::{self, InitialMeasureSpec};
use kacgas::{RngStream, TimeGrid};

fn err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn grid(t0: f64, dt: f64, k: usize) -> PyResult<TimeGrid> {
    TimeGrid::new(t0, dt, k).map_err(err)
}

/// Axis-aligned box on the torus, `"a:b[,a:b...]"`.
#[pyclass(name = "Region", module = "kacgas", frozen)]
struct Region(kacgas::TorusRegion);

#[pymethods]
impl Region {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        cli::parse_region(spec).map(Region).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn measure(&self) -> f64 {
        self.0.measure()
    }

    fn contains(&self, x: Vec<f64>) -> PyResult<bool> {
        if x.len() != self.0.dim() {
            return Err(err(format!("expected {} coordinates", self.0.dim())));
        }
        Ok(self.0.contains_coords(&x))
    }

    fn __repr__(&self) -> String {
        format!("Region(lower={:?}, upper={:?})", self.0.lower(), self.0.upper())
    }
}

/// Product law of positions and momenta.
#[pyclass(name = "InitialMeasure", module = "kacgas", frozen)]
struct InitialMeasure(InitialMeasureSpec);

#[pymethods]
impl InitialMeasure {
    #[new]
    #[pyo3(signature = (position, momentum = "thermal:1"))]
    fn new(position: &str, momentum: &str) -> PyResult<Self> {
        let position = cli::parse_position(position).map_err(err)?;
        let momentum = cli::parse_momentum(momentum, position.dim()).map_err(err)?;
        Ok(Self(InitialMeasureSpec::new(position, momentum)))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `E[f_I](t)` from the Fourier series.
    #[pyo3(signature = (region, t, tail_tol = 1e-12))]
    fn expected_fraction(&self, region: &Region, t: f64, tail_tol: f64) -> PyResult<f64> {
        analytic::expected_fraction(&self.0, &region.0, t, tail_tol).map_err(err)
    }

    #[pyo3(signature = (n, seed, stream = 0))]
    fn sample(&self, n: usize, seed: u64, stream: u64) -> PyResult<Gas> {
        let mut rng = RngStream::new(seed, stream);
        sampler::sample_microstate(&self.0, n, self.0.dim(), &mut rng).map(Gas).map_err(err)
    }
}

/// `N` free particles on the torus.
#[pyclass(name = "Gas", module = "kacgas", frozen)]
struct Gas(kacgas::GasMicrostate);

#[pymethods]
impl Gas {
    #[new]
    fn new(dim: usize, positions: Vec<f64>, momenta: Vec<f64>) -> PyResult<Self> {
        kacgas::GasMicrostate::new(dim, positions, momenta).map(Gas).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Flat, particle-major.
    fn positions(&self, t: f64) -> Vec<f64> {
        gas::evolved_coords(&self.0, t)
    }

    fn momenta(&self) -> Vec<f64> {
        self.0.momenta().to_vec()
    }

    fn fraction_in(&self, region: &Region, t: f64) -> f64 {
        gas::fraction_in(&self.0, t, &region.0)
    }

    /// `(times, f_I)` at `t0 + k dt`, `k = 1..=count`.
    fn trace(&self, region: &Region, t0: f64, dt: f64, count: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let s = gas::trace(&self.0, &region.0, &grid(t0, dt, count)?);
        Ok((s.times().to_vec(), s.values().to_vec()))
    }

    /// Evolve for `t` and flip all momenta.
    fn reversed(&self, t: f64) -> Gas {
        Gas(gas::reverse_at(&self.0, t))
    }
}

/// Kac ring: markers plus ball colours.
#[pyclass(name = "KacRing", module = "kacgas")]
struct KacRing(kac::KacConfiguration);

#[pymethods]
impl KacRing {
    /// All balls white; `signs[i] = -1` marks site `i`.
    #[new]
    fn new(signs: Vec<i8>) -> PyResult<Self> {
        kac::Markers::from_signs(&signs).map(|m| KacRing(kac::KacConfiguration::all_white(m))).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, mu, seed, stream = 0))]
    fn sample(n: usize, mu: f64, seed: u64, stream: u64) -> PyResult<Self> {
        let markers = kac::sample_markers(n, mu, &mut RngStream::new(seed, stream)).map_err(err)?;
        Ok(KacRing(kac::KacConfiguration::all_white(markers)))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n_sites()
    }

    #[getter]
    fn time(&self) -> u64 {
        self.0.time()
    }

    #[getter]
    fn marked(&self) -> usize {
        self.0.markers().count()
    }

    #[getter]
    fn delta(&self) -> i64 {
        self.0.delta()
    }

    fn colors(&self) -> Vec<i8> {
        self.0.colors()
    }

    fn step(&mut self) {
        self.0.advance();
    }

    fn inverse_step(&mut self) {
        self.0.retreat();
    }

    /// `Delta(t)` from the marker products, without stepping.
    fn delta_closed_form(&self, t: u64) -> i64 {
        kac::delta_closed_form(self.0.markers(), t)
    }

    /// `Delta` for `t = time..=time + t_max`.
    fn trace(&self, t_max: u64) -> Vec<i64> {
        kac::trace(&self.0, t_max).into_iter().map(|o| o.delta).collect()
    }
}

/// Exact `(mean, variance)` of `Delta(t)/N` over all marker sequences.
#[pyfunction]
fn brute_force_expectation(n: usize, mu: f64, t: u64) -> PyResult<(f64, f64)> {
    kac::brute_force_expectation(n, mu, t).map(|m| (m.mean, m.variance)).map_err(err)
}

#[pyfunction]
fn expected_delta_bar(mu: f64, t: u64, n: usize) -> PyResult<f64> {
    kac::expected_delta_bar(mu, t, n).map_err(err)
}

/// `(exponent, ln bound)` for `P(|f - |I|| >= eps) <= 2 exp(-2 eps^2 N)`.
#[pyfunction]
fn hoeffding_tail(epsilon: f64, n: f64) -> PyResult<(f64, f64)> {
    analytic::hoeffding_tail(epsilon, n).map(|h| (h.exponent, h.bound.log_value())).map_err(err)
}

/// `(N, eps, exponent, ln single-time bound, ln sequence bound)`.
#[pyfunction]
fn macro_estimator(
    n0: f64,
    cell_volume: f64,
    sub_volume: f64,
    delta_pi: f64,
    k: f64,
) -> PyResult<(f64, f64, f64, f64, f64)> {
    let m = analytic::macro_estimator(n0, cell_volume, sub_volume, delta_pi, k).map_err(err)?;
    Ok((m.n, m.epsilon, m.exponent, m.single_time_bound.log_value(), m.sequence_bound.log_value()))
}

/// Ring ensemble; returns the `t,mean,variance,p_dev,M` CSV and the number
/// of histories that left the band inside `window`.
#[pyfunction]
#[pyo3(signature = (n, mu, histories, t_max, epsilon, seed, window = None, workers = 1))]
#[allow(clippy::too_many_arguments)]
fn kac_ensemble(
    n: usize,
    mu: f64,
    histories: u64,
    t_max: u64,
    epsilon: f64,
    seed: u64,
    window: Option<(u64, u64)>,
    workers: usize,
) -> PyResult<(String, u64)> {
    let spec = KacEnsembleSpec { n, mu, histories, t_max, epsilon, window, master_seed: seed };
    let r = ensemble::run_kac_ensemble(&spec, workers).map_err(err)?;
    Ok((r.to_csv(), r.window_violations))
}

/// Deviation-probability scan over particle counts. Returns the
/// `N,K,deviations,M,p_hat,p_hat_over_K,stderr` CSV and the fitted `(a, b)`.
#[pyfunction]
#[pyo3(signature = (initial, region, n_values, histories, epsilon, seed, dt = 10.0, k_values = vec![1, 5, 25], workers = 1))]
#[allow(clippy::too_many_arguments)]
fn gas_scaling(
    initial: &InitialMeasure,
    region: &Region,
    n_values: Vec<usize>,
    histories: u64,
    epsilon: f64,
    seed: u64,
    dt: f64,
    k_values: Vec<usize>,
    workers: usize,
) -> PyResult<(String, Option<(f64, f64)>)> {
    let k_max = k_values.iter().copied().max().unwrap_or(1);
    let spec = ScalingExperimentSpec {
        n_values,
        histories,
        epsilon,
        grid: grid(0.0, dt, k_max)?,
        k_values,
        region: region.0.clone(),
        initial: initial.0.clone(),
        master_seed: seed,
        fit_min_n: 0,
        fit_weighting: FitWeighting::Unweighted,
    };
    let r = ensemble::run_gas_scaling(&spec, workers).map_err(err)?;
    Ok((r.to_csv(), r.fit.map(|f| (f.a, f.b))))
}

/// Run a CLI command in-process; returns the summary as JSON text.
#[pyfunction]
#[pyo3(signature = (command, config = "", out = None, seed = None, workers = None))]
fn run(
    command: &str,
    config: &str,
    out: Option<String>,
    seed: Option<u64>,
    workers: Option<usize>,
) -> PyResult<String> {
    let command: cli::Command = command.parse().map_err(err)?;
    let overrides = cli::Overrides { seed, workers, out: out.map(Into::into), params: Vec::new() };
    let cfg = cli::parse_config(command, config, &overrides).map_err(err)?;
    let artifacts = cli::execute(&cfg).map_err(err)?;
    Ok(artifacts.summary.to_string())
}

#[pymodule]
#[pyo3(name = "kacgas")]
fn kacgas_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Region>()?;
    m.add_class::<InitialMeasure>()?;
    m.add_class::<Gas>()?;
    m.add_class::<KacRing>()?;
    m.add_function(wrap_pyfunction!(brute_force_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(expected_delta_bar, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_tail, m)?)?;
    m.add_function(wrap_pyfunction!(macro_estimator, m)?)?;
    m.add_function(wrap_pyfunction!(kac_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(gas_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
