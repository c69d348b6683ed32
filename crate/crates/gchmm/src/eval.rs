//! Evaluation: thresholding, accuracy/recall, parameter error norms,
//! one-step-ahead symptom forecasting and the two-step regression
//! baseline.

use ndarray::Array2;

use crate::data::{CovariateMatrix, DynamicNetwork, StateMatrix, SymptomTensor};
use crate::error::{Error, Result};
use crate::gibbs::{run_gibbs, GibbsConfig, ParamUpdate};
use crate::linalg::{cholesky, cholesky_solve};
use crate::sim::{BetaInterpretation, InfectionParams, LinkCoefficients};
use crate::special::{logit, sigmoid};

/// Threshold posterior probabilities into hard states; strictly greater
/// than the threshold counts as infected, so ties resolve to susceptible.
pub fn classify(posterior: &Array2<f64>, threshold: f64) -> Result<StateMatrix> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain("threshold must lie in (0, 1)"));
    }
    let (n, cols) = posterior.dim();
    let mut states = StateMatrix::zeros(n, cols - 1);
    for person in 0..n {
        for day in 0..cols {
            states.set(person, day, u8::from(posterior[(person, day)] > threshold));
        }
    }
    Ok(states)
}

/// Prediction quality summary.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Metrics {
    /// Cellwise agreement fraction over all N × (T+1) cells.
    pub accuracy: f64,
    /// True-positive fraction among truth-positive cells; absent when the
    /// truth has no positives.
    pub recall: Option<f64>,
    pub norm_gamma: Option<f64>,
    pub norm_alpha: Option<f64>,
    pub norm_beta: Option<f64>,
    pub y_onestep_accuracy: Option<f64>,
}

fn norm2(truth: &[f64], estimate: &[f64]) -> f64 {
    truth
        .iter()
        .zip(estimate.iter())
        .map(|(t, e)| (t - e) * (t - e))
        .sum::<f64>()
        .sqrt()
}

/// Accuracy, recall and (when both parameter sets are given) per-rate
/// 2-norm error vectors over people.
pub fn metrics(
    truth: &StateMatrix,
    pred: &StateMatrix,
    truth_rates: Option<[&[f64]; 3]>,
    pred_rates: Option<[&[f64]; 3]>,
) -> Result<Metrics> {
    if truth.as_array().dim() != pred.as_array().dim() {
        return Err(Error::domain("state matrices must share a shape"));
    }
    let total = truth.as_array().len();
    let mut agree = 0usize;
    let mut truth_pos = 0usize;
    let mut true_pos = 0usize;
    for (t, p) in truth.as_array().iter().zip(pred.as_array().iter()) {
        if t == p {
            agree += 1;
        }
        if *t == 1 {
            truth_pos += 1;
            if *p == 1 {
                true_pos += 1;
            }
        }
    }
    let accuracy = agree as f64 / total as f64;
    let recall = (truth_pos > 0).then(|| true_pos as f64 / truth_pos as f64);

    let (mut norm_gamma, mut norm_alpha, mut norm_beta) = (None, None, None);
    if let (Some(t), Some(e)) = (truth_rates, pred_rates) {
        for (slot, out) in [&mut norm_gamma, &mut norm_alpha, &mut norm_beta]
            .into_iter()
            .enumerate()
        {
            if t[slot].len() != e[slot].len() {
                return Err(Error::domain("parameter vectors must share a length"));
            }
            *out = Some(norm2(t[slot], e[slot]));
        }
    }
    Ok(Metrics {
        accuracy,
        recall,
        norm_gamma,
        norm_alpha,
        norm_beta,
        y_onestep_accuracy: None,
    })
}

/// Propagate per-person infection probabilities one day forward through
/// the transition function, treating people as independent: an infected
/// person stays with probability 1−γ and a susceptible one converts with
/// the expected infection probability over the contacts' marginals.
pub fn predict_next_state(
    p_now: &[f64],
    params: &InfectionParams,
    network: &DynamicNetwork,
    next_day: usize,
    beta_interp: BetaInterpretation,
) -> Vec<f64> {
    let n = p_now.len();
    (0..n)
        .map(|person| {
            let mut survive = 1.0;
            for &m in network.neighbors(next_day, person) {
                let transmit = match beta_interp {
                    BetaInterpretation::Receive => params.beta[person],
                    BetaInterpretation::Transmit => params.beta[m],
                };
                survive *= 1.0 - p_now[m] * transmit;
            }
            let infect = 1.0 - (1.0 - params.alpha[person]) * survive;
            p_now[person] * (1.0 - params.gamma[person]) + (1.0 - p_now[person]) * infect
        })
        .collect()
}

/// Forward filtering pass: `p[(person, day)]` is the infection
/// probability given observations through that day, under the
/// independence approximation of [`predict_next_state`].
pub fn filter_forward(
    network: &DynamicNetwork,
    symptoms: &SymptomTensor,
    params: &InfectionParams,
    beta_interp: BetaInterpretation,
) -> Array2<f64> {
    let n = network.n_people();
    let t_days = network.n_days();
    let mut filtered = Array2::zeros((n, t_days + 1));
    let mut current: Vec<f64> = vec![params.pi; n];
    for (person, value) in current.iter().enumerate() {
        filtered[(person, 0)] = *value;
    }
    for day in 1..=t_days {
        let mut predicted = predict_next_state(&current, params, network, day, beta_interp);
        // Fold in the day's observed emissions.
        for (person, p) in predicted.iter_mut().enumerate() {
            let mut w1 = *p;
            let mut w0 = 1.0 - *p;
            for s in 0..symptoms.n_symptoms() {
                if let Some(y) = symptoms.get(person, day, s) {
                    let (t1, t0) = (params.theta[(1, s)], params.theta[(0, s)]);
                    if y == 1 {
                        w1 *= t1;
                        w0 *= t0;
                    } else {
                        w1 *= 1.0 - t1;
                        w0 *= 1.0 - t0;
                    }
                }
            }
            let total = w0 + w1;
            if total > 0.0 && total.is_finite() {
                *p = w1 / total;
            }
            filtered[(person, day)] = *p;
        }
        current = predicted;
    }
    filtered
}

/// Symptom probabilities one day ahead of the given state beliefs:
/// `P(y = 1) = p·θ₁ + (1−p)·θ₀` with `p` the propagated infection
/// probability. Returns an N × S matrix.
pub fn one_step_ahead(
    p_now: &[f64],
    params: &InfectionParams,
    network: &DynamicNetwork,
    next_day: usize,
    beta_interp: BetaInterpretation,
) -> Array2<f64> {
    let p_next = predict_next_state(p_now, params, network, next_day, beta_interp);
    let s_count = params.n_symptoms();
    let mut probs = Array2::zeros((p_now.len(), s_count));
    for (person, p) in p_next.iter().enumerate() {
        for s in 0..s_count {
            probs[(person, s)] = p * params.theta[(1, s)] + (1.0 - p) * params.theta[(0, s)];
        }
    }
    probs
}

/// Filter through each day and score the next day's observed symptoms at
/// a 0.5 threshold. `None` when nothing is observed.
pub fn one_step_ahead_accuracy(
    network: &DynamicNetwork,
    symptoms: &SymptomTensor,
    params: &InfectionParams,
    beta_interp: BetaInterpretation,
) -> Option<f64> {
    let filtered = filter_forward(network, symptoms, params, beta_interp);
    let n = network.n_people();
    let mut correct = 0usize;
    let mut total = 0usize;
    for day in 1..=network.n_days() {
        let p_prev: Vec<f64> = (0..n).map(|p| filtered[(p, day - 1)]).collect();
        let probs = one_step_ahead(&p_prev, params, network, day, beta_interp);
        for person in 0..n {
            for s in 0..symptoms.n_symptoms() {
                if let Some(y) = symptoms.get(person, day, s) {
                    total += 1;
                    let predicted = u8::from(probs[(person, s)] > 0.5);
                    if predicted == y {
                        correct += 1;
                    }
                }
            }
        }
    }
    (total > 0).then(|| correct as f64 / total as f64)
}

/// Least-squares fit of logit targets on the covariates: the second stage
/// of the two-step baseline. Posterior means are clamped away from {0, 1}
/// before the transform; a collinear design falls back to a small ridge.
pub fn fit_logistic_baseline(
    posterior_means: &[f64],
    covariates: &CovariateMatrix,
) -> Result<(Vec<f64>, Vec<String>)> {
    let n = covariates.n_people();
    let k = covariates.dim();
    if posterior_means.len() != n {
        return Err(Error::domain("one posterior mean per person required"));
    }
    let mut warnings = Vec::new();
    let targets: Vec<f64> = posterior_means
        .iter()
        .map(|m| logit(m.clamp(1e-6, 1.0 - 1e-6)))
        .collect();

    let z = covariates.as_array();
    let mut normal = Array2::<f64>::zeros((k, k));
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in i..k {
            let v = z.column(i).dot(&z.column(j));
            normal[(i, j)] = v;
            normal[(j, i)] = v;
        }
        rhs[i] = z
            .column(i)
            .iter()
            .zip(targets.iter())
            .map(|(a, b)| a * b)
            .sum();
    }
    let coeffs = match cholesky(&normal) {
        Some(l) => cholesky_solve(&l, &rhs),
        None => {
            warnings.push("collinear covariates; ridge fallback".to_string());
            for i in 0..k {
                normal[(i, i)] += 1e-6;
            }
            let l = cholesky(&normal)
                .ok_or_else(|| Error::numerical("ridge-regularized system still singular"))?;
            cholesky_solve(&l, &rhs)
        }
    };
    Ok((coeffs, warnings))
}

/// Result of the two-step baseline: flat-prior per-person Gibbs followed
/// by a logistic regression of the posterior-mean rates on the
/// covariates.
#[derive(Debug, Clone)]
pub struct TwoStepResult {
    pub eta: LinkCoefficients,
    /// Regression-implied per-person rates σ(z·η̂).
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Raw posterior-mean rates from the first stage.
    pub posterior_gamma: Vec<f64>,
    pub posterior_alpha: Vec<f64>,
    pub posterior_beta: Vec<f64>,
    pub mean_infected: Array2<f64>,
    pub warnings: Vec<String>,
}

/// Run the two-step baseline.
pub fn two_step_baseline(
    network: &DynamicNetwork,
    symptoms: &SymptomTensor,
    covariates: &CovariateMatrix,
    config: &GibbsConfig,
) -> Result<TwoStepResult> {
    let k = covariates.dim();
    // Flat Beta(1, 1) priors on the rates: zero link coefficients. The
    // emission priors lean the infected state toward symptom onset, which
    // pins the otherwise exchangeable state labels.
    let update = ParamUpdate::Heterogeneous {
        eta: LinkCoefficients::zero_beta_exp(k),
        hyper: crate::data::BetaHyperParams {
            theta0: (1.0, 3.0),
            theta1: (3.0, 1.0),
            ..crate::data::BetaHyperParams::flat()
        },
    };
    let trace = run_gibbs(network, symptoms, Some(covariates), update, config)?;

    let mut warnings = Vec::new();
    let mut fit = |targets: &[f64]| -> Result<Vec<f64>> {
        let (coeffs, mut w) = fit_logistic_baseline(targets, covariates)?;
        warnings.append(&mut w);
        Ok(coeffs)
    };
    let eta_r = fit(&trace.mean_gamma)?;
    let eta_a = fit(&trace.mean_alpha)?;
    let eta_b = fit(&trace.mean_beta)?;

    let fitted = |coeffs: &[f64]| -> Vec<f64> {
        (0..covariates.n_people())
            .map(|p| sigmoid(covariates.dot(p, coeffs)))
            .collect()
    };
    Ok(TwoStepResult {
        gamma: fitted(&eta_r),
        alpha: fitted(&eta_a),
        beta: fitted(&eta_b),
        eta: LinkCoefficients::Sigmoid {
            recovery: eta_r,
            outside: eta_a,
            inside: eta_b,
        },
        posterior_gamma: trace.mean_gamma,
        posterior_alpha: trace.mean_alpha,
        posterior_beta: trace.mean_beta,
        mean_infected: trace.mean_infected,
        warnings,
    })
}
