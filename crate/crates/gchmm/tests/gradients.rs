//! Analytic derivatives of every likelihood against central finite
//! differences, plus optimizer contracts.

mod common;

use gchmm::bgem::{
    log_likelihood_beta_exp, log_likelihood_beta_exp_transmit, log_likelihood_sigmoid,
    newton_step, GaussianPrior, ObjectiveEval, SigmoidCounts,
};
use gchmm::data::CovariateMatrix;
use gchmm::gibbs::{CountStatistics, PersonCounts};
use gchmm::sim::BetaInterpretation;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_RTOL: f64 = 1e-4;
const HESS_RTOL: f64 = 1e-3;

fn random_counts(rng: &mut ChaCha8Rng, mode: BetaInterpretation, n: usize) -> CountStatistics {
    let per_person = (0..n)
        .map(|_| PersonCounts {
            stay_susceptible: rng.random_range(0..40),
            infections: rng.random_range(0..6),
            recoveries: rng.random_range(0..8),
            stay_infected: rng.random_range(0..15),
            source_outside: rng.random_range(0..4),
            source_inside: rng.random_range(0..4),
            source_inside_strict: rng.random_range(0..4),
            survived_exposure: rng.random_range(0..25),
            infected_others: rng.random_range(0..5),
            declined_exposure: rng.random_range(0..15),
        })
        .collect();
    CountStatistics { mode, per_person }
}

fn random_covariates(rng: &mut ChaCha8Rng, n: usize, features: usize) -> CovariateMatrix {
    CovariateMatrix::from_features(
        (0..n)
            .map(|_| (0..features).map(|_| rng.random_range(-1.2..1.2)).collect())
            .collect(),
    )
    .unwrap()
}

fn check_against_finite_differences<F>(f: F, eta: &[f64], label: &str)
where
    F: Fn(&[f64]) -> ObjectiveEval,
{
    let h = 1e-5;
    let eval = f(eta);
    for i in 0..eta.len() {
        let mut up = eta.to_vec();
        up[i] += h;
        let mut dn = eta.to_vec();
        dn[i] -= h;
        let (fu, fd) = (f(&up), f(&dn));
        let fd_grad = (fu.value - fd.value) / (2.0 * h);
        let scale = eval.gradient[i].abs().max(1.0);
        assert!(
            (eval.gradient[i] - fd_grad).abs() / scale < GRAD_RTOL,
            "{label}: gradient[{i}] {} vs finite difference {fd_grad}",
            eval.gradient[i]
        );
        for j in 0..eta.len() {
            let fd_hess = (fu.gradient[j] - fd.gradient[j]) / (2.0 * h);
            let scale = eval.hessian[(i, j)].abs().max(1.0);
            assert!(
                (eval.hessian[(i, j)] - fd_hess).abs() / scale < HESS_RTOL,
                "{label}: hessian[{i},{j}] {} vs finite difference {fd_hess}",
                eval.hessian[(i, j)]
            );
        }
    }
    // Symmetry of the analytic Hessian.
    for i in 0..eta.len() {
        for j in 0..eta.len() {
            assert!(
                (eval.hessian[(i, j)] - eval.hessian[(j, i)]).abs() < 1e-8,
                "{label}: hessian asymmetry at ({i},{j})"
            );
        }
    }
}

#[test]
fn integrated_likelihood_derivatives_over_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let prior = GaussianPrior::isotropic(2, 10.0);
    // 50 receive + 50 transmit instances = 100 random (counts, eta) pairs.
    for trial in 0..50 {
        for mode in [BetaInterpretation::Receive, BetaInterpretation::Transmit] {
            let counts = random_counts(&mut rng, mode, 3);
            let z = random_covariates(&mut rng, 3, 1);
            let eta: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |e: &[f64]| match mode {
                BetaInterpretation::Receive => {
                    log_likelihood_beta_exp(&counts, &z, e, &prior).unwrap()
                }
                BetaInterpretation::Transmit => {
                    log_likelihood_beta_exp_transmit(&counts, &z, e, &prior).unwrap()
                }
            };
            check_against_finite_differences(f, &eta, &format!("{mode:?} trial {trial}"));
        }
    }
}

#[test]
fn sigmoid_likelihood_derivatives_over_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let prior = GaussianPrior::isotropic(2, 10.0);
    for trial in 0..100 {
        let n = 3;
        let z = random_covariates(&mut rng, n, 1);
        let mut counts = SigmoidCounts::zeros(n, 3);
        for p in 0..n {
            counts.recovered[p] = rng.random_range(0..8) as f64;
            counts.stayed_infected[p] = rng.random_range(0..8) as f64;
            for c in 0..=3 {
                counts.infected_at[p][c] = rng.random_range(0..4) as f64;
                counts.stayed_at[p][c] = rng.random_range(0..20) as f64;
            }
        }
        let eta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.2..1.2)).collect();
        let f = |e: &[f64]| log_likelihood_sigmoid(&counts, &z, e, &prior).unwrap();
        check_against_finite_differences(f, &eta, &format!("sigmoid trial {trial}"));
    }
}

#[test]
fn newton_contracts() {
    // A concave quadratic is maximized in one undamped step.
    let center = [0.8, -1.3];
    let quad = |eta: &[f64]| {
        let mut value = 0.0;
        let mut gradient = vec![0.0; 2];
        let mut hessian = Array2::zeros((2, 2));
        let scale = [3.0, 0.7];
        for i in 0..2 {
            let d = eta[i] - center[i];
            value -= 0.5 * scale[i] * d * d;
            gradient[i] = -scale[i] * d;
            hessian[(i, i)] = -scale[i];
        }
        Ok(ObjectiveEval {
            value,
            gradient,
            hessian,
        })
    };
    let report = newton_step(quad, &[0.0, 0.0], 5).unwrap();
    assert_eq!(report.iterations, 1);
    for (e, c) in report.eta.iter().zip(center.iter()) {
        assert!((e - c).abs() < 1e-12);
    }

    // On a real likelihood, every accepted step increases the objective.
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let prior = GaussianPrior::isotropic(2, 10.0);
    let counts = random_counts(&mut rng, BetaInterpretation::Receive, 4);
    let z = random_covariates(&mut rng, 4, 1);
    let f = |e: &[f64]| log_likelihood_beta_exp(&counts, &z, e, &prior);
    let mut eta = vec![0.0; 12];
    let mut last = f(&eta).unwrap().value;
    for _ in 0..6 {
        let report = newton_step(f, &eta, 1).unwrap();
        assert!(
            report.value >= last - 1e-12,
            "objective decreased: {last} -> {}",
            report.value
        );
        last = report.value;
        eta = report.eta;
    }
}

#[test]
fn newton_matches_long_gradient_ascent_on_sigmoid_likelihood() {
    // Separable synthetic counts; gradient ascent with a small step is the
    // slow oracle for the same maximizer.
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let z = random_covariates(&mut rng, 5, 1);
    let prior = GaussianPrior::isotropic(2, 10.0);
    let mut counts = SigmoidCounts::zeros(5, 2);
    for p in 0..5 {
        counts.recovered[p] = rng.random_range(1..6) as f64;
        counts.stayed_infected[p] = rng.random_range(1..6) as f64;
        counts.infected_at[p][1] = rng.random_range(0..3) as f64;
        counts.stayed_at[p][0] = rng.random_range(5..20) as f64;
        counts.stayed_at[p][1] = rng.random_range(2..10) as f64;
    }
    let f = |e: &[f64]| log_likelihood_sigmoid(&counts, &z, e, &prior);

    let newton = newton_step(f, &[0.0; 6], 50).unwrap();

    let mut eta = vec![0.0; 6];
    for _ in 0..200_000 {
        let eval = f(&eta).unwrap();
        for (e, g) in eta.iter_mut().zip(eval.gradient.iter()) {
            *e += 1e-3 * g;
        }
    }
    for (a, b) in newton.eta.iter().zip(eta.iter()) {
        assert!((a - b).abs() < 1e-4, "newton {a} vs ascent {b}");
    }
}
