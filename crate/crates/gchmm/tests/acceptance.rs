//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test -p gchmm --test acceptance -- --nocapture`.
//!
//! The semi-synthetic protocol lives in `common`: an 84-person,
//! 107-day degree-capped scale-free dynamic network, standardized
//! covariates, sigmoid-linked ground-truth parameters and six symptom
//! streams.

mod common;

use std::time::Instant;

use common::*;
use gchmm::bgem::{
    log_likelihood_beta_exp, log_likelihood_beta_exp_transmit, log_likelihood_sigmoid,
    newton_step, run_bgem, BgemConfig, BgemLink, GaussianPrior, ObjectiveEval, SigmoidCounts,
};
use gchmm::bp::{build_factor_graph, run_forward_backward, viterbi, BpOptions};
use gchmm::data::{CovariateMatrix, DynamicNetwork};
use gchmm::eval::two_step_baseline;
use gchmm::gbw::{run_gbw, GbwOptions, GbwParams};
use gchmm::gibbs::{
    approx_source_numerators, count_statistics, hidden_state_probability, run_gibbs,
    sample_aux_source, source_numerators, AuxSourceMode, CountStatistics, GibbsConfig,
    ParamUpdate, PersonCounts, SourceLabel,
};
use gchmm::sim::{infection_probability, mask_missing_seeded, BetaInterpretation};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

const RUNTIME_BUDGET_SECS: f64 = 60.0;

#[test]
fn criterion_1_known_parameter_state_recovery() {
    let results: Vec<_> = (0..5u64)
        .map(|seed| {
            std::thread::spawn(move || {
                let inst = semi_synthetic(seed);
                assert!(inst.network.max_degree() <= SEMI_MAX_DEGREE);

                let t0 = Instant::now();
                let graph =
                    build_factor_graph(&inst.network, &inst.truth_params, SEMI_SYMPTOMS).unwrap();
                let bp = run_forward_backward(
                    &graph,
                    &inst.symptoms,
                    &BpOptions {
                        max_sweeps: 150,
                        tol: 1e-6,
                    },
                )
                .unwrap();
                let bp_secs = t0.elapsed().as_secs_f64();
                let bp_acc = posterior_accuracy(&inst.truth_states, &bp.p_infected);

                let t0 = Instant::now();
                let trace = run_gibbs(
                    &inst.network,
                    &inst.symptoms,
                    None,
                    ParamUpdate::Fixed(inst.truth_params.clone()),
                    &GibbsConfig {
                        iterations: 500,
                        seed: 4000 + seed,
                        ..Default::default()
                    },
                )
                .unwrap();
                let gibbs_secs = t0.elapsed().as_secs_f64();
                let gibbs_acc = posterior_accuracy(&inst.truth_states, &trace.mean_infected);
                (bp_acc, bp_secs, gibbs_acc, gibbs_secs)
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();

    let mut bp_accs: Vec<f64> = results.iter().map(|r| r.0).collect();
    let mut gibbs_accs: Vec<f64> = results.iter().map(|r| r.2).collect();
    let floor_ok = results.iter().all(|r| r.0 >= 0.97 && r.2 >= 0.97);
    let runtime_ok = results
        .iter()
        .all(|r| r.1 <= RUNTIME_BUDGET_SECS && r.3 <= RUNTIME_BUDGET_SECS);
    let bp_median = median(&mut bp_accs);
    let gibbs_median = median(&mut gibbs_accs);
    let pass = floor_ok && runtime_ok && bp_median >= 0.985 && gibbs_median >= 0.985;
    report(
        1,
        "known-parameter state recovery",
        pass,
        &format!(
            "median accuracy: sum-product {bp_median:.4}, sampler {gibbs_median:.4}; \
             per-seed floor 0.97 {floor_ok}; runtimes within {RUNTIME_BUDGET_SECS}s {runtime_ok}"
        ),
    );
}

#[test]
fn criterion_2_unknown_parameter_em() {
    let mut accs: Vec<f64> = (0..5u64)
        .map(|seed| {
            std::thread::spawn(move || {
                let inst = semi_synthetic(seed);
                let res = run_gbw(
                    &inst.network,
                    &inst.symptoms,
                    GbwParams::neutral(SEMI_SYMPTOMS, 0.1),
                    &GbwOptions::default(),
                )
                .unwrap();
                posterior_accuracy(&inst.truth_states, &res.p_infected)
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    let med = median(&mut accs);
    report(
        2,
        "unknown-parameter EM",
        med >= 0.95,
        &format!("median accuracy over 5 seeds: {med:.4} (threshold 0.95)"),
    );
}

#[test]
fn criterion_3_hierarchical_recovery_ordering() {
    struct SeedOutcome {
        sigmoid: [f64; 3],
        beta_exp: [f64; 3],
        baseline: [f64; 3],
    }
    let outcomes: Vec<SeedOutcome> = (0..10u64)
        .map(|seed| {
            std::thread::spawn(move || {
                let inst = semi_synthetic(seed);
                let tp = &inst.truth_params;
                let sig = run_bgem(
                    &inst.network,
                    &inst.symptoms,
                    &inst.covariates,
                    &BgemConfig {
                        seed: 6000 + seed,
                        ..Default::default()
                    },
                )
                .unwrap();
                let bexp = run_bgem(
                    &inst.network,
                    &inst.symptoms,
                    &inst.covariates,
                    &BgemConfig {
                        link: BgemLink::BetaExp,
                        seed: 6000 + seed,
                        ..Default::default()
                    },
                )
                .unwrap();
                let base = two_step_baseline(
                    &inst.network,
                    &inst.symptoms,
                    &inst.covariates,
                    &GibbsConfig {
                        iterations: 1000,
                        seed: 7000 + seed,
                        ..Default::default()
                    },
                )
                .unwrap();
                SeedOutcome {
                    sigmoid: [
                        norm2(&tp.gamma, &sig.gamma),
                        norm2(&tp.alpha, &sig.alpha),
                        norm2(&tp.beta, &sig.beta),
                    ],
                    beta_exp: [
                        norm2(&tp.gamma, &bexp.gamma),
                        norm2(&tp.alpha, &bexp.alpha),
                        norm2(&tp.beta, &bexp.beta),
                    ],
                    baseline: [
                        norm2(&tp.gamma, &base.gamma),
                        norm2(&tp.alpha, &base.alpha),
                        norm2(&tp.beta, &base.beta),
                    ],
                }
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();

    let wins = outcomes
        .iter()
        .filter(|o| (0..3).all(|i| o.sigmoid[i] < o.baseline[i]))
        .count();

    // The stochastic-link clause is judged on the seed medians: between
    // the sigmoid and baseline errors, with a 10% tie margin at either
    // bound.
    let mut between = true;
    let mut detail_meds = String::new();
    for i in 0..3 {
        let mut s: Vec<f64> = outcomes.iter().map(|o| o.sigmoid[i]).collect();
        let mut x: Vec<f64> = outcomes.iter().map(|o| o.beta_exp[i]).collect();
        let mut b: Vec<f64> = outcomes.iter().map(|o| o.baseline[i]).collect();
        let (ms, mx, mb) = (median(&mut s), median(&mut x), median(&mut b));
        between &= mx >= 0.9 * ms && mx <= 1.1 * mb;
        detail_meds.push_str(&format!(" [{ms:.3} ≤ {mx:.3} ≤ {mb:.3}]"));
    }

    report(
        3,
        "hierarchical recovery ordering",
        wins >= 8 && between,
        &format!(
            "sigmoid beats baseline on all rates in {wins}/10 seeds (need 8); \
             stochastic-link medians within bounds {between}:{detail_meds}"
        ),
    );
}

#[test]
fn criterion_4_missing_data_robustness() {
    let mut drops: Vec<f64> = (0..5u64)
        .map(|seed| {
            std::thread::spawn(move || {
                let inst = semi_synthetic(seed);
                let masked = mask_missing_seeded(&inst.symptoms, 0.5, 5000 + seed).unwrap();
                let run = |symptoms| {
                    run_gibbs(
                        &inst.network,
                        symptoms,
                        None,
                        ParamUpdate::Fixed(inst.truth_params.clone()),
                        &GibbsConfig {
                            iterations: 500,
                            seed: 4000 + seed,
                            ..Default::default()
                        },
                    )
                    .unwrap()
                };
                let full = posterior_accuracy(&inst.truth_states, &run(&inst.symptoms).mean_infected);
                let part = posterior_accuracy(&inst.truth_states, &run(&masked).mean_infected);
                full - part
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    let med = median(&mut drops);
    report(
        4,
        "missing data robustness",
        med <= 0.05,
        &format!("median accuracy drop at half-missing observations: {med:.4} (budget 0.05)"),
    );
}

#[test]
fn criterion_5_decomposition_exactness_and_error_curves() {
    // Exact three-term recovery at a single exposure.
    let mut max_gap: f64 = 0.0;
    for ai in 1..100 {
        for bi in 1..100 {
            let (a, b) = (ai as f64 / 100.0, bi as f64 / 100.0);
            let total: f64 = approx_source_numerators(a, b, 1).iter().sum();
            let infect = infection_probability(a, b, 1);
            max_gap = max_gap.max((total - infect).abs());
        }
    }
    let exact_ok = max_gap <= 1e-15;

    // Higher exposures: the approximation error is flat in the outside
    // rate at any fixed inside rate.
    let mut max_spread: f64 = 0.0;
    for c in 2..=11usize {
        for bi in 1..100 {
            let b = bi as f64 / 100.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for ai in 1..100 {
                let a = ai as f64 / 100.0;
                let total: f64 = approx_source_numerators(a, b, c).iter().sum();
                let err = (total - infection_probability(a, b, c)).abs();
                lo = lo.min(err);
                hi = hi.max(err);
            }
            max_spread = max_spread.max(hi - lo);
        }
    }
    let flat_ok = max_spread <= 1e-12;

    // The exact numerators always reassemble the infection probability.
    let mut exact_sum_gap: f64 = 0.0;
    for ai in 1..100 {
        for bi in 1..100 {
            let (a, b) = (ai as f64 / 100.0, bi as f64 / 100.0);
            for c in [1usize, 3, 7, 11] {
                let total: f64 = source_numerators(a, b, c).iter().sum();
                exact_sum_gap =
                    exact_sum_gap.max((total - infection_probability(a, b, c)).abs());
            }
        }
    }
    let identity_ok = exact_sum_gap <= 1e-15;

    report(
        5,
        "decomposition exactness and error curves",
        exact_ok && flat_ok && identity_ok,
        &format!(
            "single-exposure gap {max_gap:.1e} (≤1e-15); error spread over outside rate \
             {max_spread:.1e} (≤1e-12); exact numerator identity gap {exact_sum_gap:.1e}"
        ),
    );
}

#[test]
fn criterion_6_oracle_equivalence() {
    let exact_opts = BpOptions {
        max_sweeps: 80,
        tol: 1e-13,
    };

    // Coupling-free marginals against enumeration.
    let mut tree_gap: f64 = 0.0;
    for seed in 0..3u64 {
        let inst = random_small_instance(1500 + seed, 2, 3, 1, 0.0, 0.4);
        let graph = build_factor_graph(&inst.network, &inst.params, 1).unwrap();
        let bp = run_forward_backward(&graph, &inst.symptoms, &exact_opts).unwrap();
        let exact = enumerate_marginals(
            &inst.symptoms,
            &inst.params,
            &inst.network,
            BetaInterpretation::Receive,
        );
        for (a, b) in bp.p_infected.iter().zip(exact.iter()) {
            tree_gap = tree_gap.max((a - b).abs());
        }
    }
    let tree_ok = tree_gap <= 1e-9;

    // Loopy marginals stay close.
    let mut loopy_gap: f64 = 0.0;
    for seed in 0..3u64 {
        let inst = random_small_instance(1600 + seed, 3, 3, 1, 0.6, 0.4);
        let graph = build_factor_graph(&inst.network, &inst.params, 1).unwrap();
        let bp = run_forward_backward(&graph, &inst.symptoms, &exact_opts).unwrap();
        let exact = enumerate_marginals(
            &inst.symptoms,
            &inst.params,
            &inst.network,
            BetaInterpretation::Receive,
        );
        for (a, b) in bp.p_infected.iter().zip(exact.iter()) {
            loopy_gap = loopy_gap.max((a - b).abs());
        }
    }
    let loopy_ok = loopy_gap <= 0.05;

    // Max-product decode equals the enumerated maximizer.
    let mut viterbi_ok = true;
    for seed in 0..4u64 {
        let inst = random_small_instance(1700 + seed, 3, 3, 1, 0.5, 0.4);
        let graph = build_factor_graph(&inst.network, &inst.params, 1).unwrap();
        let decoded = viterbi(&graph, &inst.symptoms, &exact_opts).unwrap();
        let map = enumerate_map(
            &inst.symptoms,
            &inst.params,
            &inst.network,
            BetaInterpretation::Receive,
        );
        viterbi_ok &= decoded.as_array() == map.as_array();
    }

    // Every full conditional equals the joint-density ratio.
    let mut conditional_gap: f64 = 0.0;
    for (offset, interp) in [
        (1800u64, BetaInterpretation::Receive),
        (1900u64, BetaInterpretation::Transmit),
    ] {
        for seed in 0..3u64 {
            let mut inst = random_small_instance(offset + seed, 3, 3, 2, 0.5, 0.3);
            for person in 0..3 {
                for day in 0..=3 {
                    let p1 = hidden_state_probability(
                        &inst.states,
                        &inst.symptoms,
                        &inst.params,
                        &inst.network,
                        person,
                        day,
                        interp,
                    );
                    let original = inst.states.get(person, day);
                    inst.states.set(person, day, 1);
                    let j1 = joint_density(
                        &inst.states,
                        &inst.symptoms,
                        &inst.params,
                        &inst.network,
                        interp,
                    );
                    inst.states.set(person, day, 0);
                    let j0 = joint_density(
                        &inst.states,
                        &inst.symptoms,
                        &inst.params,
                        &inst.network,
                        interp,
                    );
                    inst.states.set(person, day, original);
                    conditional_gap = conditional_gap.max((p1 - j1 / (j0 + j1)).abs());
                }
            }
        }
    }
    let conditional_ok = conditional_gap <= 1e-9;

    // Count statistics equal an independent recount.
    let mut counts_ok = true;
    for (offset, mode) in [
        (2000u64, BetaInterpretation::Receive),
        (2100u64, BetaInterpretation::Transmit),
    ] {
        for seed in 0..3u64 {
            let inst = random_small_instance(offset + seed, 4, 4, 1, 0.5, 0.5);
            let mut rng = ChaCha8Rng::seed_from_u64(offset + 50 + seed);
            let aux = sample_aux_source(
                &inst.states,
                &inst.params,
                &inst.network,
                mode,
                AuxSourceMode::DropBoth,
                &mut rng,
            );
            let stats = count_statistics(&inst.states, &aux, &inst.network, mode).unwrap();
            // Recount transition pairs cell by cell.
            for person in 0..4 {
                let mut expect = PersonCounts::default();
                for t in 0..inst.states.n_days() {
                    match (inst.states.get(person, t), inst.states.get(person, t + 1)) {
                        (0, 0) => expect.stay_susceptible += 1,
                        (0, 1) => expect.infections += 1,
                        (1, 0) => expect.recoveries += 1,
                        _ => expect.stay_infected += 1,
                    }
                }
                let c = &stats.per_person[person];
                counts_ok &= expect.stay_susceptible == c.stay_susceptible
                    && expect.infections == c.infections
                    && expect.recoveries == c.recoveries
                    && expect.stay_infected == c.stay_infected;
                // Every infection carries exactly one label.
                let labeled = (0..inst.states.n_days())
                    .filter(|&t| aux.get(person, t).is_some())
                    .count();
                counts_ok &= labeled == c.infections;
            }
        }
    }

    // Transmit-product reindexing identity.
    let mut reindex_gap: f64 = 0.0;
    for seed in 0..3u64 {
        let inst = random_small_instance(2200 + seed, 4, 4, 1, 0.6, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2250 + seed);
        let aux = sample_aux_source(
            &inst.states,
            &inst.params,
            &inst.network,
            BetaInterpretation::Transmit,
            AuxSourceMode::DropBoth,
            &mut rng,
        );
        let mut original = 0.0f64;
        for person in 0..4 {
            for t in 0..inst.states.n_days() {
                if inst.states.get(person, t) != 0 {
                    continue;
                }
                let stayed = inst.states.get(person, t + 1) == 0;
                let outside = aux.get(person, t) == Some(SourceLabel::Outside);
                for &m in inst
                    .network
                    .neighbors(t + 1, person)
                    .iter()
                    .filter(|&&m| inst.states.get(m, t) == 1)
                {
                    if stayed || outside {
                        original += (1.0 - inst.params.beta[m]).ln();
                    }
                    if aux.get(person, t) == Some(SourceLabel::Neighbor(m)) {
                        original += inst.params.beta[m].ln();
                    }
                }
            }
        }
        let stats = count_statistics(
            &inst.states,
            &aux,
            &inst.network,
            BetaInterpretation::Transmit,
        )
        .unwrap();
        let reindexed: f64 = stats
            .per_person
            .iter()
            .enumerate()
            .map(|(person, c)| {
                c.infected_others as f64 * inst.params.beta[person].ln()
                    + c.declined_exposure as f64 * (1.0 - inst.params.beta[person]).ln()
            })
            .sum();
        reindex_gap = reindex_gap.max((original - reindexed).abs());
    }
    let reindex_ok = reindex_gap <= 1e-12;

    report(
        6,
        "oracle equivalence",
        tree_ok && loopy_ok && viterbi_ok && conditional_ok && counts_ok && reindex_ok,
        &format!(
            "tree marginals {tree_gap:.1e} (≤1e-9); loopy {loopy_gap:.1e} (≤0.05); \
             decode exact {viterbi_ok}; conditionals {conditional_gap:.1e} (≤1e-9); \
             counts exact {counts_ok}; reindexing {reindex_gap:.1e} (≤1e-12)"
        ),
    );
}

#[test]
fn criterion_7_numerical_optimization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2300);
    let prior = GaussianPrior::isotropic(2, 10.0);
    let h = 1e-5;
    let mut grad_ok = true;
    let mut hess_ok = true;
    let mut checked = 0usize;

    let mut check = |f: &dyn Fn(&[f64]) -> ObjectiveEval, eta: &[f64]| {
        let eval = f(eta);
        for i in 0..eta.len() {
            let mut up = eta.to_vec();
            up[i] += h;
            let mut dn = eta.to_vec();
            dn[i] -= h;
            let (fu, fd) = (f(&up), f(&dn));
            let fd_grad = (fu.value - fd.value) / (2.0 * h);
            grad_ok &=
                (eval.gradient[i] - fd_grad).abs() / eval.gradient[i].abs().max(1.0) < 1e-4;
            for j in 0..eta.len() {
                let fd_hess = (fu.gradient[j] - fd.gradient[j]) / (2.0 * h);
                hess_ok &= (eval.hessian[(i, j)] - fd_hess).abs()
                    / eval.hessian[(i, j)].abs().max(1.0)
                    < 1e-3;
                hess_ok &= (eval.hessian[(i, j)] - eval.hessian[(j, i)]).abs() < 1e-8;
            }
        }
    };

    for trial in 0..50 {
        let mode = if trial % 2 == 0 {
            BetaInterpretation::Receive
        } else {
            BetaInterpretation::Transmit
        };
        let counts = CountStatistics {
            mode,
            per_person: (0..3)
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
                .collect(),
        };
        let z = CovariateMatrix::from_features(
            (0..3).map(|_| vec![rng.random_range(-1.2..1.2)]).collect(),
        )
        .unwrap();
        let eta: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |e: &[f64]| match mode {
            BetaInterpretation::Receive => log_likelihood_beta_exp(&counts, &z, e, &prior).unwrap(),
            BetaInterpretation::Transmit => {
                log_likelihood_beta_exp_transmit(&counts, &z, e, &prior).unwrap()
            }
        };
        check(&f, &eta);
        checked += 1;
    }
    for _trial in 0..50 {
        let z = CovariateMatrix::from_features(
            (0..3).map(|_| vec![rng.random_range(-1.2..1.2)]).collect(),
        )
        .unwrap();
        let mut table = SigmoidCounts::zeros(3, 3);
        for p in 0..3 {
            table.recovered[p] = rng.random_range(0..8) as f64;
            table.stayed_infected[p] = rng.random_range(0..8) as f64;
            for c in 0..=3 {
                table.infected_at[p][c] = rng.random_range(0..4) as f64;
                table.stayed_at[p][c] = rng.random_range(0..20) as f64;
            }
        }
        let eta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.2..1.2)).collect();
        let f = |e: &[f64]| log_likelihood_sigmoid(&table, &z, e, &prior).unwrap();
        check(&f, &eta);
        checked += 1;
    }

    // One undamped step maximizes a concave quadratic.
    let center = [1.25, -0.5];
    let quad = |eta: &[f64]| {
        let mut value = 0.0;
        let mut gradient = vec![0.0; 2];
        let mut hessian = Array2::zeros((2, 2));
        for i in 0..2 {
            let d = eta[i] - center[i];
            value -= 0.5 * (i as f64 + 1.0) * d * d;
            gradient[i] = -(i as f64 + 1.0) * d;
            hessian[(i, i)] = -(i as f64 + 1.0);
        }
        Ok(ObjectiveEval {
            value,
            gradient,
            hessian,
        })
    };
    let newton = newton_step(quad, &[0.0, 0.0], 5).unwrap();
    let one_step_ok = newton.iterations == 1
        && newton
            .eta
            .iter()
            .zip(center.iter())
            .all(|(a, b)| (a - b).abs() < 1e-12);

    // Accepted steps never decrease the objective.
    let counts = CountStatistics {
        mode: BetaInterpretation::Receive,
        per_person: vec![
            PersonCounts {
                stay_susceptible: 30,
                infections: 3,
                recoveries: 5,
                stay_infected: 10,
                source_outside: 2,
                source_inside: 1,
                source_inside_strict: 1,
                survived_exposure: 12,
                ..Default::default()
            };
            3
        ],
    };
    let z = CovariateMatrix::intercept_only(3);
    let prior1 = GaussianPrior::isotropic(1, 10.0);
    let f = |e: &[f64]| log_likelihood_beta_exp(&counts, &z, e, &prior1);
    let mut eta = vec![0.0; 6];
    let mut last = f(&eta).unwrap().value;
    let mut monotone_ok = true;
    for _ in 0..6 {
        let r = newton_step(f, &eta, 1).unwrap();
        monotone_ok &= r.value >= last - 1e-12;
        last = r.value;
        eta = r.eta;
    }

    report(
        7,
        "numerical optimization",
        grad_ok && hess_ok && one_step_ok && monotone_ok,
        &format!(
            "{checked} random instances: gradients within 1e-4 {grad_ok}, Hessians within \
             1e-3 and symmetric {hess_ok}; quadratic one-step {one_step_ok}; \
             monotone accepted steps {monotone_ok}"
        ),
    );
}

#[test]
fn criterion_8_fast_variant_parity() {
    let mut diffs: Vec<f64> = (0..3u64)
        .map(|seed| {
            std::thread::spawn(move || {
                let inst = semi_synthetic(seed);
                let run = |fast: bool| {
                    run_bgem(
                        &inst.network,
                        &inst.symptoms,
                        &inst.covariates,
                        &BgemConfig {
                            fast_binary: fast,
                            seed: 6000 + seed,
                            ..Default::default()
                        },
                    )
                    .unwrap()
                };
                let full = posterior_accuracy(&inst.truth_states, &run(false).mean_infected);
                let fast = posterior_accuracy(&inst.truth_states, &run(true).mean_infected);
                (full - fast).abs()
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let max_diff = *diffs.last().unwrap();
    report(
        8,
        "fast-variant parity",
        max_diff < 0.01,
        &format!("largest accuracy gap between averaged and majority-vote variants: {max_diff:.4}"),
    );
}

// Criterion 9 (byte-identical command-line pipelines) exercises the
// binary and lives in the driver crate's acceptance suite.

/// Guard for the sweep-cost bound: the biggest instance's per-sweep work
/// stays within the acceptance runtime budget by a wide margin, which the
/// criterion-1 timings already demonstrate; here we only pin the degree
/// cap that the bound depends on.
#[test]
fn semi_synthetic_degree_cap_holds() {
    for seed in 0..5u64 {
        let inst = semi_synthetic(seed);
        assert!(inst.network.max_degree() <= SEMI_MAX_DEGREE);
        let dims = gchmm::data::ProblemDims::new(
            SEMI_PEOPLE,
            SEMI_DAYS,
            SEMI_SYMPTOMS,
            4,
            inst.network.max_degree(),
        )
        .unwrap();
        assert_eq!(dims.n_people, SEMI_PEOPLE);
    }
}
