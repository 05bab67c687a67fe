//! Runs a validated [`RunConfig`] and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use super::config::{Command, RunConfig, WindowSpec};
use crate::analytic::{
    expected_deviation, expected_fraction, hoeffding_tail, log_k_n, macro_estimator, markov_bound,
    partition_scenario_bound, scenario_bound, BoundsReport, ScenarioParameters, SequenceLength,
};
use crate::csv::{self, CsvTable};
use crate::ensemble::{
    run_fluctuation_trace, run_gas_scaling, run_kac_ensemble, KacEnsembleSpec, ScalingExperimentSpec,
};
use crate::gas::{evolved_coords, fraction_in, reverse_at};
use crate::kac::{self, brute_force_expectation, expected_delta_bar, sample_markers, theorem3_quantities};
use crate::logprob::Bound;
use crate::rng::RngStream;
use crate::sampler::sample_microstate;

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("{0}")]
    Model(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

/// Files written by a run plus the summary document.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

struct Output {
    csv: Vec<(&'static str, String)>,
    results: Value,
}

fn bound_json(b: Bound) -> Value {
    json!({
        "log_value": b.log_value(),
        "log10_value": b.log10(),
        "linear_value": b.linear(),
        "vacuous": b.is_vacuous(),
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, ExecError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| ExecError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Execute `config`, writing CSVs and `summary.json` under its output path.
pub fn execute(config: &RunConfig) -> Result<Artifacts, ExecError> {
    let start = Instant::now();
    let out = match config.command {
        Command::GasTrace => gas_trace(config)?,
        Command::GasScaling => gas_scaling(config)?,
        Command::GasMean => gas_mean(config)?,
        Command::GasReverse => gas_reverse(config)?,
        Command::KacTrace => kac_trace(config)?,
        Command::KacEnsemble => kac_ensemble(config)?,
        Command::KacBrute => kac_brute(config)?,
        Command::Bounds => bounds(config)?,
        Command::Macro => macro_cell(config)?,
    };
    let dir = &config.output_path;
    fs::create_dir_all(dir).map_err(|source| ExecError::Io { path: dir.clone(), source })?;
    let mut files = Vec::new();
    for (name, text) in &out.csv {
        files.push(write(dir, name, text)?);
    }
    let summary = json!({
        "command": config.command.name(),
        "master_seed": config.master_seed,
        "worker_count": config.worker_count,
        "versions": { env!("CARGO_PKG_NAME"): env!("CARGO_PKG_VERSION") },
        "wall_time_s": start.elapsed().as_secs_f64(),
        "config": config.parameters,
        "outputs": out.csv.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
        "results": out.results,
    });
    let text = serde_json::to_string_pretty(&summary).expect("json values serialize") + "\n";
    files.push(write(dir, "summary.json", &text)?);
    Ok(Artifacts { files, summary })
}

fn gas_trace(c: &RunConfig) -> Result<Output, ExecError> {
    let n = c.count("n") as usize;
    let region = c.region();
    let series = run_fluctuation_trace(n, &c.initial(), &region, &c.grid(), c.master_seed)?;
    let (mean, std) = series.mean_std();
    let m = region.measure();
    Ok(Output {
        csv: vec![("trace.csv", series.to_csv())],
        results: json!({
            "rows": series.len(),
            "mean": mean,
            "std": std,
            "equilibrium_std": (m * (1.0 - m) / n as f64).sqrt(),
        }),
    })
}

fn gas_scaling(c: &RunConfig) -> Result<Output, ExecError> {
    let spec = ScalingExperimentSpec {
        n_values: c.counts("n_values").into_iter().map(|x| x as usize).collect(),
        histories: c.count("histories"),
        epsilon: c.real("epsilon"),
        grid: c.grid(),
        k_values: c.counts("k_values").into_iter().map(|x| x as usize).collect(),
        region: c.region(),
        initial: c.initial(),
        master_seed: c.master_seed,
        fit_min_n: c.count("fit_min_n") as usize,
        fit_weighting: c.weighting(),
    };
    let result = run_gas_scaling(&spec, c.worker_count)?;
    let mut comparisons = Vec::new();
    for row in &result.rows {
        let bound = result.normalised_bound(row.n)?;
        comparisons.push(json!({
            "N": row.n,
            "K": row.k,
            "p_hat_over_K": row.p_hat_over_k,
            "bound": bound.linear(),
            "within_bound": bound.admits(row.p_hat_over_k),
        }));
    }
    let fit = result.fit.as_ref().map(|f| json!({ "a": f.a, "b": f.b, "excluded_points": f.excluded }));
    Ok(Output {
        csv: vec![("scaling.csv", result.to_csv())],
        results: json!({ "fit": fit, "bound_comparisons": comparisons }),
    })
}

fn gas_mean(c: &RunConfig) -> Result<Output, ExecError> {
    let region = c.region();
    let initial = c.initial();
    let grid = c.grid();
    let tol = c.real("tail_tol");
    let samples = c.count("mc_samples") as usize;
    let state = sample_microstate(&initial, samples, region.dim(), &mut RngStream::new(c.master_seed, 1))?;
    let mut table = CsvTable::new(&["t", "expected", "deviation", "mc_mean", "mc_stderr"]);
    let mut worst_z: f64 = 0.0;
    for t in grid.times() {
        let e = expected_fraction(&initial, &region, t, tol)?;
        let d = expected_deviation(&initial, &region, t, tol)?;
        let f = fraction_in(&state, t, &region);
        let se = (f * (1.0 - f) / samples as f64).sqrt();
        if se > 0.0 {
            worst_z = worst_z.max((f - e).abs() / se);
        }
        table.row([csv::num(t), csv::num(e), csv::num(d), csv::num(f), csv::num(se)]);
    }
    Ok(Output {
        csv: vec![("mean.csv", table.finish())],
        results: json!({ "rows": grid.k_count(), "max_abs_z": worst_z }),
    })
}

fn gas_reverse(c: &RunConfig) -> Result<Output, ExecError> {
    let n = c.count("n") as usize;
    let region = c.region();
    let t_rev = c.real("t_reverse");
    let steps = c.count("steps") as usize;
    let state = sample_microstate(&c.initial(), n, region.dim(), &mut RngStream::new(c.master_seed, 0))?;
    let reversed = reverse_at(&state, t_rev);
    let mut table = CsvTable::new(&["t", "f"]);
    let mut forward = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let s = t_rev * k as f64 / steps as f64;
        let f = fraction_in(&state, s, &region);
        forward.push(f);
        table.row([csv::num(s), csv::num(f)]);
    }
    let mut mirror: f64 = 0.0;
    for k in 1..=steps {
        let s = t_rev * k as f64 / steps as f64;
        let f = fraction_in(&reversed, s, &region);
        mirror = mirror.max((f - forward[steps - k]).abs());
        table.row([csv::num(t_rev + s), csv::num(f)]);
    }
    let back = evolved_coords(&reversed, t_rev);
    let return_error = back
        .iter()
        .zip(state.positions())
        .map(|(a, b)| {
            let d = (a - b).abs();
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max);
    Ok(Output {
        csv: vec![("reverse.csv", table.finish())],
        results: json!({
            "rows": 2 * steps + 1,
            "f_initial": forward[0],
            "f_at_reversal": forward[steps],
            "max_position_return_error": return_error,
            "max_mirror_mismatch": mirror,
        }),
    })
}

fn kac_trace(c: &RunConfig) -> Result<Output, ExecError> {
    let n = c.count("n") as usize;
    let t_max = c.count("t_max");
    let markers = sample_markers(n, c.real("mu"), &mut RngStream::new(c.master_seed, 0))?;
    let m = markers.count();
    let config = kac::KacConfiguration::all_white(markers);
    let trace = kac::trace(&config, t_max);
    let recurrence = (t_max >= 2 * n as u64).then(|| trace[2 * n].delta == trace[0].delta);
    Ok(Output {
        csv: vec![("kac_trace.csv", kac::trace_csv(0, &trace))],
        results: json!({ "marked_sites": m, "rows": trace.len(), "recurs_at_2n": recurrence }),
    })
}

fn kac_ensemble(c: &RunConfig) -> Result<Output, ExecError> {
    let n = c.count("n") as usize;
    let (mu, epsilon, alpha) = (c.real("mu"), c.real("epsilon"), c.real("alpha"));
    let t_max = c.count("t_max");
    let th = theorem3_quantities(epsilon, alpha, mu)?;
    let window = match c.window() {
        WindowSpec::None => None,
        WindowSpec::Fixed(a, b) => Some((a, b)),
        WindowSpec::Theorem3 => {
            let t0 = th.t0().ok_or_else(|| ExecError::Invalid(format!("no equilibration time for mu = {mu}")))?;
            let tn = th.t_n(n).floor() as u64;
            if t0 > tn {
                return Err(ExecError::Invalid(format!("empty window: t0 = {t0} exceeds t_N = {tn}")));
            }
            Some((t0, tn))
        }
    };
    let spec =
        KacEnsembleSpec { n, mu, histories: c.count("histories"), t_max, epsilon, window, master_seed: c.master_seed };
    let result = run_kac_ensemble(&spec, c.worker_count)?;
    let bound = th.sequence_bound(n);
    let mut csv = vec![("kac_ensemble.csv", result.to_csv())];
    if window.is_some() {
        csv.push(("kac_window.csv", result.window_csv()));
    }
    Ok(Output {
        csv,
        results: json!({
            "window": window,
            "window_violations": result.window_violations,
            "window_fraction": window.map(|_| result.window_fraction()),
            "theorem3": {
                "t0": th.t0(),
                "t_n": th.t_n(n),
                "n_epsilon": th.n_epsilon,
                "applies": th.applies_to(n),
                "sequence_bound": bound_json(bound),
            },
            "half_period_mismatches": result.half_period_mismatches,
        }),
    })
}

fn kac_brute(c: &RunConfig) -> Result<Output, ExecError> {
    let n = c.count("n") as usize;
    let mu = c.real("mu");
    let mut table = CsvTable::new(&["t", "mean", "variance", "closed_form"]);
    let mut worst: f64 = 0.0;
    for t in 0..=c.count("t_max") {
        let bf = brute_force_expectation(n, mu, t)?;
        let exact = expected_delta_bar(mu, t, n)?;
        worst = worst.max((bf.mean - exact).abs());
        table.row([t.to_string(), csv::num(bf.mean), csv::num(bf.variance), csv::num(exact)]);
    }
    Ok(Output { csv: vec![("brute.csv", table.finish())], results: json!({ "max_abs_mean_error": worst }) })
}

fn bounds(c: &RunConfig) -> Result<Output, ExecError> {
    let (epsilon, n, eta) = (c.real("epsilon"), c.real("n"), c.real("eta"));
    let k = c.sequence("k");
    let regions = c.count("regions") as usize;
    let params = ScenarioParameters::new(epsilon, n, eta, k)?;
    let mut report = BoundsReport::new();
    report.push("hoeffding_single_time", hoeffding_tail(epsilon, n)?.bound);
    report.push("scenario", scenario_bound(&params));
    report.push("partition_scenario", partition_scenario_bound(&params, regions)?);
    if c.flag("t_large") {
        report.push("markov", markov_bound(epsilon, n, true)?);
    }
    let mut results = serde_json::Map::new();
    for (q, l) in report.rows() {
        results.insert(q.clone(), bound_json(Bound::from_ln(*l)));
    }
    results.insert("log_k".into(), json!(params.log_k()));
    if k == SequenceLength::Maximal {
        results.insert("log_k_n".into(), json!(log_k_n(epsilon, n)));
    }
    Ok(Output { csv: vec![("bounds.csv", report.to_csv())], results: Value::Object(results) })
}

fn macro_cell(c: &RunConfig) -> Result<Output, ExecError> {
    let est =
        macro_estimator(c.real("n0"), c.real("cell_volume"), c.real("sub_volume"), c.real("delta_pi"), c.real("k"))?;
    let mut report = BoundsReport::new();
    report.push("single_time", est.single_time_bound);
    report.push("sequence", est.sequence_bound);
    Ok(Output {
        csv: vec![("bounds.csv", report.to_csv())],
        results: json!({
            "n": est.n,
            "epsilon": est.epsilon,
            "exponent": est.exponent,
            "single_time_bound": bound_json(est.single_time_bound),
            "sequence_bound": bound_json(est.sequence_bound),
        }),
    })
}
