//! Benchmarks for the data-parallel hot paths.
//!
//! The same suite compiles in two execution modes: the default build
//! drives factor updates and per-sample objective evaluations through
//! rayon, while `--no-default-features` uses the sequential fallback.
//! Bench ids carry the mode, so
//!
//! ```text
//! cargo bench -p gchmm -- --save-baseline parallel
//! cargo bench -p gchmm --no-default-features -- --save-baseline sequential
//! ```
//!
//! produces directly comparable baselines.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use gchmm::bp::{build_factor_graph, run_forward_backward, BpOptions};
use gchmm::data::{synthetic_scale_free, CovariateMatrix};
use gchmm::gibbs::{GibbsConfig, GibbsSampler, ParamUpdate};
use gchmm::sim::{simulate, InfectionParams, ParamSource, SimConfig};

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

struct Fixture {
    network: gchmm::data::DynamicNetwork,
    params: InfectionParams,
    symptoms: gchmm::data::SymptomTensor,
}

fn fixture() -> Fixture {
    let network = synthetic_scale_free(84, 107, 11, 2, 0.35, 9001);
    let theta = gchmm::sim::two_level_theta(6, 0.05, 0.75);
    let params = InfectionParams::homogeneous(84, 0.3, 0.04, 0.17, 0.15, theta).unwrap();
    let sim = simulate(
        &network,
        None,
        &ParamSource::Fixed(params.clone()),
        &SimConfig {
            seed: 42,
            ..Default::default()
        },
        6,
    )
    .unwrap();
    Fixture {
        network,
        params,
        symptoms: sim.symptoms,
    }
}

fn bench_simulate(c: &mut Criterion) {
    let network = synthetic_scale_free(84, 107, 11, 2, 0.35, 9001);
    let theta = gchmm::sim::two_level_theta(6, 0.05, 0.75);
    let params = InfectionParams::homogeneous(84, 0.3, 0.04, 0.17, 0.15, theta).unwrap();
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    group.bench_function(BenchmarkId::new("trajectory", MODE), |b| {
        b.iter(|| {
            let out = simulate(
                &network,
                None,
                &ParamSource::Fixed(params.clone()),
                &SimConfig {
                    seed: 3,
                    ..Default::default()
                },
                6,
            )
            .unwrap();
            black_box(out.states);
        })
    });
    group.finish();
}

fn bench_forward_backward(c: &mut Criterion) {
    let f = fixture();
    let graph = build_factor_graph(&f.network, &f.params, 6).unwrap();
    let mut group = c.benchmark_group("forward_backward");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sweeps_to_convergence", MODE), |b| {
        b.iter(|| {
            let res = run_forward_backward(
                &graph,
                &f.symptoms,
                &BpOptions {
                    max_sweeps: 60,
                    tol: 1e-6,
                },
            )
            .unwrap();
            black_box(res.p_infected);
        })
    });
    group.finish();
}

fn bench_gibbs(c: &mut Criterion) {
    let f = fixture();
    let mut group = c.benchmark_group("gibbs");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("fifty_sweeps", MODE), |b| {
        b.iter(|| {
            let mut sampler = GibbsSampler::new(
                &f.network,
                &f.symptoms,
                None,
                ParamUpdate::Fixed(f.params.clone()),
                &GibbsConfig {
                    iterations: 50,
                    seed: 5,
                    ..Default::default()
                },
            )
            .unwrap();
            for _ in 0..50 {
                sampler.sweep().unwrap();
            }
            black_box(sampler.states().agreement(sampler.states()));
        })
    });
    group.finish();
}

fn bench_objective(c: &mut Criterion) {
    use gchmm::bgem::{log_likelihood_beta_exp, GaussianPrior};
    use gchmm::gibbs::{count_statistics, sample_aux_source, AuxSourceMode};
    use gchmm::sim::BetaInterpretation;
    use rand::SeedableRng;

    let f = fixture();
    let sim = simulate(
        &f.network,
        None,
        &ParamSource::Fixed(f.params.clone()),
        &SimConfig {
            seed: 8,
            ..Default::default()
        },
        6,
    )
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let aux = sample_aux_source(
        &sim.states,
        &f.params,
        &f.network,
        BetaInterpretation::Receive,
        AuxSourceMode::DropBoth,
        &mut rng,
    );
    let counts =
        count_statistics(&sim.states, &aux, &f.network, BetaInterpretation::Receive).unwrap();
    let covariates = CovariateMatrix::from_features(
        (0..84).map(|i| vec![(i as f64 - 42.0) / 42.0]).collect(),
    )
    .unwrap();
    let prior = GaussianPrior::isotropic(2, 10.0);
    let eta = vec![0.1; 12];

    let mut group = c.benchmark_group("integrated_likelihood");
    group.bench_function(BenchmarkId::new("value_grad_hessian", MODE), |b| {
        b.iter(|| {
            let eval = log_likelihood_beta_exp(&counts, &covariates, &eta, &prior).unwrap();
            black_box(eval.value);
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_simulate,
    bench_forward_backward,
    bench_gibbs,
    bench_objective
);
criterion_main!(benches);
