//! Benchmarks for the hot paths: path simulation, likelihood evaluation,
//! the profile/sup statistic of the censored-exponential case, and the EM
//! fitters that dominate bootstrap cost.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mmlrt_core::censored_exp::{
    cov_scores, lambda_sup, profile_lambda, rho, sample_censored, ThetaSearch,
};
use mmlrt_core::ctmc::{CtmcParams, SuffStats};
use mmlrt_core::mixture::{em_fit_two_component, fit_one_component, FitOptions};
use mmlrt_core::rng::stream_rng;

fn two_state() -> CtmcParams {
    CtmcParams::new(
        vec![0.6, 0.4],
        vec![1.0, 1.6],
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        1.5,
    )
    .unwrap()
}

fn three_state_absorbing() -> CtmcParams {
    CtmcParams::new_boundary(
        vec![0.6, 0.4, 0.0],
        vec![1.0, 1.5, 0.0],
        vec![
            vec![0.0, 0.7, 0.3],
            vec![0.6, 0.0, 0.4],
            vec![0.0, 0.0, 0.0],
        ],
        2.0,
    )
    .unwrap()
}

fn stats_for(params: &CtmcParams, n: usize, seed: u64) -> Vec<SuffStats> {
    let mut rng = stream_rng(seed, &[0]);
    (0..n)
        .map(|_| SuffStats::from_path(&params.sample_path(&mut rng), params.w()).unwrap())
        .collect()
}

fn bench_simulation(c: &mut Criterion) {
    for (name, params) in [
        ("two_state", two_state()),
        ("three_state_absorbing", three_state_absorbing()),
    ] {
        let mut rng = stream_rng(1, &[0]);
        c.bench_function(&format!("sample_path/{name}"), |b| {
            b.iter(|| black_box(params.sample_path(&mut rng)))
        });
        let stats = stats_for(&params, 200, 2);
        c.bench_function(&format!("log_density_200/{name}"), |b| {
            b.iter(|| {
                let total: f64 = stats.iter().map(|s| params.log_density(s)).sum();
                black_box(total)
            })
        });
    }
}

fn bench_censored(c: &mut Criterion) {
    let mut rng = stream_rng(3, &[0]);
    let sample = sample_censored(1.0, 1.0, 1000, &mut rng).unwrap();
    c.bench_function("profile_lambda/n1000", |b| {
        b.iter(|| black_box(profile_lambda(&sample, 2.0).unwrap().lambda))
    });
    let search = ThetaSearch::default_for(1000, 1.0).unwrap();
    c.bench_function("lambda_sup/n1000", |b| {
        b.iter(|| black_box(lambda_sup(&sample, &search).unwrap().lambda))
    });
    c.bench_function("closed_form/cov_scores", |b| {
        b.iter(|| black_box(cov_scores(black_box(1.7), black_box(2.3), 1.0)))
    });
    c.bench_function("closed_form/rho_censored", |b| {
        b.iter(|| black_box(rho(black_box(0.3), black_box(0.9), Some(1.0))))
    });
}

fn bench_fitters(c: &mut Criterion) {
    let params = two_state();
    let samples = stats_for(&params, 200, 4);
    c.bench_function("fit_one_component/n200", |b| {
        b.iter(|| black_box(fit_one_component(&samples, 1.5).unwrap().loglik))
    });
    let opts = FitOptions {
        n_restarts: 2,
        max_iters: 200,
        loglik_tol: 1e-6,
        seed: 5,
        ..FitOptions::default()
    };
    c.bench_function("em_fit_two_component/n200", |b| {
        b.iter(|| black_box(em_fit_two_component(&samples, 1.5, &opts).unwrap().loglik))
    });
}

criterion_group!(benches, bench_simulation, bench_censored, bench_fitters);
criterion_main!(benches);
