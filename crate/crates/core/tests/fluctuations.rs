use std::time::{Duration, Instant};

use kacgas::ensemble::{run_fluctuation_trace, run_gas_scaling, FitWeighting, ScalingExperimentSpec};
use kacgas::gas::fraction_in;
use kacgas::sampler::{sample_microstate, InitialMeasureSpec, MomentumLaw, PositionLaw};
use kacgas::{RngStream, TimeGrid, TorusRegion};

fn half() -> TorusRegion {
    TorusRegion::interval(0.0, 0.5).unwrap()
}

fn setup() -> InitialMeasureSpec {
    InitialMeasureSpec::new(PositionLaw::Uniform(half()), MomentumLaw::thermal(1.0, 1).unwrap())
}

#[test]
fn trace_starts_full_and_settles_at_half() {
    for n in [100usize, 10_000] {
        let state = sample_microstate(&setup(), n, 1, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(fraction_in(&state, 0.0, &half()), 1.0);
        let grid = TimeGrid::new(0.0, 0.5, 240).unwrap();
        let s = run_fluctuation_trace(n, &setup(), &half(), &grid, 5).unwrap();
        let tail = &s.values()[39..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!((mean - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "N={n} mean={mean}");
    }
}

#[test]
fn spread_shrinks_like_inverse_root_n() {
    let grid = TimeGrid::new(19.5, 0.5, 201).unwrap();
    let std = |n: usize| -> f64 {
        (0..4u64)
            .map(|seed| run_fluctuation_trace(n, &setup(), &half(), &grid, seed).unwrap().mean_std().1)
            .sum::<f64>()
            / 4.0
    };
    let ratio = std(100) / std(10_000);
    assert!((5.0..20.0).contains(&ratio), "ratio {ratio}");
}

fn scaling_time(n: usize, histories: u64) -> Duration {
    let spec = ScalingExperimentSpec {
        n_values: vec![n],
        histories,
        // so large no history ever deviates: every history costs the full K steps
        epsilon: 0.9,
        grid: TimeGrid::new(0.0, 10.0, 25).unwrap(),
        k_values: vec![25],
        region: half(),
        initial: setup(),
        master_seed: 1,
        fit_min_n: 0,
        fit_weighting: FitWeighting::Unweighted,
    };
    (0..3)
        .map(|_| {
            let t = Instant::now();
            run_gas_scaling(&spec, 1).unwrap();
            t.elapsed()
        })
        .min()
        .unwrap()
}

#[test]
fn wall_time_linear_in_work() {
    let base = scaling_time(1000, 1000).as_secs_f64();
    for (n, m) in [(4000, 1000), (1000, 4000)] {
        let ratio = scaling_time(n, m).as_secs_f64() / base;
        assert!((2.0..8.0).contains(&ratio), "N={n} M={m}: time ratio {ratio} for 4x work");
    }
}
