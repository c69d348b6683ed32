//! Covariate-linked parameter estimation by burn-in Gibbs EM.
//!
//! Each outer iteration runs a block of Gibbs sweeps under the previous
//! coefficients (the parameters are refreshed inside every sweep, so late
//! samples track the current posterior), then maximizes two Monte Carlo
//! objectives: the burn-in average over the kept samples and the
//! single-last-sample version. The new coefficients are their convex
//! combination with a diminishing weight on the single-sample optimum, so
//! early iterations search widely and late iterations settle on the
//! averaged objective.
//!
//! The fast binary variant replaces the sample average with one
//! pseudo-sample built from per-cell majority votes over the kept sweeps.

mod newton;
mod objective;

pub use newton::{newton_step, step_size_schedule, NewtonReport};
pub use objective::{
    average_evals, log_likelihood_beta_exp, log_likelihood_beta_exp_transmit,
    log_likelihood_sigmoid, GaussianPrior, ObjectiveEval, SigmoidCounts,
};

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::{
    exposure_count, exposure_sources, BetaHyperParams, CovariateMatrix, DynamicNetwork,
    StateMatrix, SymptomTensor,
};
use crate::error::{Error, Result};
use crate::exec::map_collect;
use crate::gibbs::{
    count_statistics, AuxSourceMatrix, AuxSourceMode, CountStatistics, GibbsConfig, GibbsSampler,
    ParamUpdate, SourceLabel,
};
use crate::sim::{sigmoid_link, BetaInterpretation, LinkCoefficients};
use crate::special::sigmoid;

/// Which link maps covariates to infection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BgemLink {
    Sigmoid,
    BetaExp,
}

/// Configuration of the EM loop.
#[derive(Debug, Clone)]
pub struct BgemConfig {
    pub link: BgemLink,
    pub beta_interp: BetaInterpretation,
    /// Gibbs sweeps per E-step (J).
    pub samples_per_estep: usize,
    /// Sweeps discarded at the start of each E-step (B < J).
    pub burn_in: usize,
    pub max_em_iters: usize,
    /// Stop once ‖η_k − η_{k−1}‖∞ drops below this.
    pub eta_tol: f64,
    /// Newton iterations per M-step.
    pub newton_inner: usize,
    /// Use the majority-vote pseudo-sample instead of the sample average.
    pub fast_binary: bool,
    /// Per-vector Gaussian prior; defaults to zero-mean with variance 10.
    pub prior: Option<GaussianPrior>,
    pub hyper: BetaHyperParams,
    pub seed: u64,
}

impl Default for BgemConfig {
    fn default() -> Self {
        BgemConfig {
            link: BgemLink::Sigmoid,
            beta_interp: BetaInterpretation::Receive,
            samples_per_estep: 50,
            burn_in: 25,
            max_em_iters: 10,
            eta_tol: 1e-3,
            newton_inner: 5,
            fast_binary: false,
            prior: None,
            // Emission priors lean the infected state toward symptom
            // onset, pinning the otherwise exchangeable labeling.
            hyper: BetaHyperParams {
                theta0: (1.0, 3.0),
                theta1: (3.0, 1.0),
                ..BetaHyperParams::flat()
            },
            seed: 0,
        }
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BgemIterDiag {
    pub iteration: usize,
    pub step_size: f64,
    pub q_average: f64,
    pub q_last_sample: f64,
    pub grad_norm_average: f64,
    pub grad_norm_last_sample: f64,
    pub eta_change: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BgemDiagnostics {
    pub iterations: Vec<BgemIterDiag>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Result of a full EM run.
#[derive(Debug, Clone)]
pub struct BgemResult {
    pub eta: LinkCoefficients,
    /// Per-person (recovery, outside, inside) rates implied by the link.
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Posterior mean of the hidden states from the final E-step.
    pub mean_infected: Array2<f64>,
    pub diagnostics: BgemDiagnostics,
}

/// Number of stacked coefficients for a link over K covariates.
pub fn stacked_len(link: BgemLink, k: usize) -> usize {
    match link {
        BgemLink::Sigmoid => 3 * k,
        BgemLink::BetaExp => 6 * k,
    }
}

/// Flatten link coefficients into the stacked layout.
pub fn stack_eta(eta: &LinkCoefficients) -> Vec<f64> {
    match eta {
        LinkCoefficients::Sigmoid {
            recovery,
            outside,
            inside,
        } => {
            let mut v = Vec::with_capacity(3 * recovery.len());
            v.extend_from_slice(recovery);
            v.extend_from_slice(outside);
            v.extend_from_slice(inside);
            v
        }
        LinkCoefficients::BetaExp {
            recovery,
            outside,
            inside,
        } => {
            let mut v = Vec::with_capacity(6 * recovery[0].len());
            for pair in [recovery, outside, inside] {
                v.extend_from_slice(&pair[0]);
                v.extend_from_slice(&pair[1]);
            }
            v
        }
    }
}

/// Rebuild link coefficients from the stacked layout.
pub fn unstack_eta(link: BgemLink, k: usize, stacked: &[f64]) -> Result<LinkCoefficients> {
    if stacked.len() != stacked_len(link, k) {
        return Err(Error::domain("stacked coefficient length mismatch"));
    }
    let block = |i: usize| stacked[i * k..(i + 1) * k].to_vec();
    Ok(match link {
        BgemLink::Sigmoid => LinkCoefficients::Sigmoid {
            recovery: block(0),
            outside: block(1),
            inside: block(2),
        },
        BgemLink::BetaExp => LinkCoefficients::BetaExp {
            recovery: [block(0), block(1)],
            outside: [block(2), block(3)],
            inside: [block(4), block(5)],
        },
    })
}

/// Componentwise convex combination `(1−δ)·a + δ·b`.
pub fn combine_eta(a: &[f64], b: &[f64], delta: f64) -> Vec<f64> {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (1.0 - delta) * x + delta * y)
        .collect()
}

/// Per-person rates implied by link coefficients: the sigmoid link maps
/// them directly; the beta-exponential link reports its posterior mean
/// `1 / (1 + exp(z·(η₂ − η₁)))` per role.
pub fn implied_params(
    eta: &LinkCoefficients,
    covariates: &CovariateMatrix,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = covariates.n_people();
    let mut gamma = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    match eta {
        LinkCoefficients::Sigmoid { .. } => {
            for person in 0..n {
                let row: Vec<f64> = covariates.row(person).to_vec();
                let (g, a, b) = sigmoid_link(&row, eta)?;
                gamma.push(g);
                alpha.push(a);
                beta.push(b);
            }
        }
        LinkCoefficients::BetaExp {
            recovery,
            outside,
            inside,
        } => {
            for person in 0..n {
                let mean = |pair: &[Vec<f64>; 2]| -> f64 {
                    let diff: f64 = covariates
                        .row(person)
                        .iter()
                        .enumerate()
                        .map(|(i, z)| z * (pair[1][i] - pair[0][i]))
                        .sum();
                    sigmoid(-diff)
                };
                gamma.push(mean(recovery));
                alpha.push(mean(outside));
                beta.push(mean(inside));
            }
        }
    }
    Ok((gamma, alpha, beta))
}

/// What one E-step hands the M-step.
struct EStepData {
    /// Per kept sweep, the count statistics (beta-exponential link).
    count_samples: Vec<CountStatistics>,
    /// Kept-sweep sum of sigmoid count tables (sigmoid link).
    sigmoid_sum: SigmoidCounts,
    last_counts: Option<CountStatistics>,
    last_sigmoid: Option<SigmoidCounts>,
    mean_infected: Array2<f64>,
    kept: usize,
    /// Majority-vote payloads (fast variant).
    outside_votes: Array2<u32>,
    inside_votes: Array2<u32>,
    neighbor_votes: BTreeMap<(usize, usize), BTreeMap<usize, u32>>,
}

fn param_update_for(
    link: BgemLink,
    eta: &LinkCoefficients,
    covariates: &CovariateMatrix,
    hyper: BetaHyperParams,
) -> Result<ParamUpdate> {
    Ok(match link {
        BgemLink::BetaExp => ParamUpdate::Heterogeneous {
            eta: eta.clone(),
            hyper,
        },
        BgemLink::Sigmoid => {
            let (gamma, alpha, beta) = implied_params(eta, covariates)?;
            ParamUpdate::FixedRates {
                gamma,
                alpha,
                beta,
                hyper,
            }
        }
    })
}

fn run_e_step(
    sampler: &mut GibbsSampler<'_>,
    network: &DynamicNetwork,
    config: &BgemConfig,
) -> Result<EStepData> {
    let n = network.n_people();
    let t_days = network.n_days();
    let mut data = EStepData {
        count_samples: Vec::new(),
        sigmoid_sum: SigmoidCounts::zeros(n, network.max_degree()),
        last_counts: None,
        last_sigmoid: None,
        mean_infected: Array2::zeros((n, t_days + 1)),
        kept: 0,
        outside_votes: Array2::zeros((n, t_days)),
        inside_votes: Array2::zeros((n, t_days)),
        neighbor_votes: BTreeMap::new(),
    };
    for sweep_idx in 0..config.samples_per_estep {
        sampler.sweep()?;
        if sweep_idx < config.burn_in {
            continue;
        }
        data.kept += 1;
        let states = sampler.states();
        for person in 0..n {
            for day in 0..=t_days {
                data.mean_infected[(person, day)] += f64::from(states.get(person, day));
            }
        }
        match config.link {
            BgemLink::BetaExp => {
                data.count_samples.push(sampler.counts()?);
            }
            BgemLink::Sigmoid => {
                data.sigmoid_sum.accumulate(states, network, 1.0);
            }
        }
        if config.fast_binary {
            for person in 0..n {
                for t in 0..t_days {
                    match sampler.aux().get(person, t) {
                        Some(SourceLabel::Outside) => data.outside_votes[(person, t)] += 1,
                        Some(SourceLabel::Inside) | Some(SourceLabel::Both) => {
                            data.inside_votes[(person, t)] += 1
                        }
                        Some(SourceLabel::Neighbor(m)) => {
                            *data
                                .neighbor_votes
                                .entry((person, t))
                                .or_default()
                                .entry(m)
                                .or_default() += 1;
                            data.inside_votes[(person, t)] += 1;
                        }
                        None => {}
                    }
                }
            }
        }
    }
    if data.kept == 0 {
        return Err(Error::domain("burn-in left no samples"));
    }
    data.mean_infected /= data.kept as f64;
    match config.link {
        BgemLink::BetaExp => data.last_counts = Some(sampler.counts()?),
        BgemLink::Sigmoid => {
            data.last_sigmoid = Some(SigmoidCounts::from_states(sampler.states(), network))
        }
    }
    Ok(data)
}

/// Build the majority-vote pseudo-sample: states thresholded at 0.5, each
/// transition labeled by its most frequent source. Outside is the default
/// whenever the voted source is not an infectious contact of the
/// thresholded states.
fn fast_pseudo_sample(
    data: &EStepData,
    network: &DynamicNetwork,
    beta_interp: BetaInterpretation,
) -> (StateMatrix, AuxSourceMatrix) {
    let (n, cols) = data.mean_infected.dim();
    let t_days = cols - 1;
    let mut states = StateMatrix::zeros(n, t_days);
    for person in 0..n {
        for day in 0..cols {
            states.set(person, day, u8::from(data.mean_infected[(person, day)] > 0.5));
        }
    }
    let mut aux = AuxSourceMatrix::empty(n, t_days);
    for person in 0..n {
        for t in 0..t_days {
            if !(states.get(person, t) == 0 && states.get(person, t + 1) == 1) {
                continue;
            }
            let label = match beta_interp {
                BetaInterpretation::Receive => {
                    let inside = data.inside_votes[(person, t)];
                    let outside = data.outside_votes[(person, t)];
                    let total = inside + outside;
                    let inside_wins = total > 0 && f64::from(inside) / f64::from(total) > 0.5;
                    if inside_wins && exposure_count(&states, network, person, t + 1) > 0 {
                        SourceLabel::Inside
                    } else {
                        SourceLabel::Outside
                    }
                }
                BetaInterpretation::Transmit => {
                    let sources = exposure_sources(&states, network, person, t + 1);
                    let mut best: Option<(usize, u32)> = None;
                    if let Some(votes) = data.neighbor_votes.get(&(person, t)) {
                        for (&m, &count) in votes {
                            if !sources.contains(&m) {
                                continue;
                            }
                            if best.map_or(true, |(_, c)| count > c) {
                                best = Some((m, count));
                            }
                        }
                    }
                    let outside = data.outside_votes[(person, t)];
                    match best {
                        Some((m, count)) if count > outside => SourceLabel::Neighbor(m),
                        _ => SourceLabel::Outside,
                    }
                }
            };
            aux.set(person, t, Some(label));
        }
    }
    (states, aux)
}

enum MStepObjective<'a> {
    BetaExpMany(&'a [CountStatistics]),
    BetaExpOne(&'a CountStatistics),
    Sigmoid(&'a SigmoidCounts),
}

fn optimize(
    target: MStepObjective<'_>,
    covariates: &CovariateMatrix,
    prior: &GaussianPrior,
    eta0: &[f64],
    newton_inner: usize,
) -> Result<NewtonReport> {
    match target {
        MStepObjective::BetaExpMany(samples) => newton_step(
            |eta: &[f64]| {
                let evals: Vec<Result<ObjectiveEval>> = map_collect(samples.len(), |j| {
                    objective::log_likelihood_beta_exp_any(&samples[j], covariates, eta, prior)
                });
                let mut collected = Vec::with_capacity(evals.len());
                for e in evals {
                    collected.push(e?);
                }
                average_evals(collected)
            },
            eta0,
            newton_inner,
        ),
        MStepObjective::BetaExpOne(counts) => newton_step(
            |eta: &[f64]| objective::log_likelihood_beta_exp_any(counts, covariates, eta, prior),
            eta0,
            newton_inner,
        ),
        MStepObjective::Sigmoid(counts) => newton_step(
            |eta: &[f64]| log_likelihood_sigmoid(counts, covariates, eta, prior),
            eta0,
            newton_inner,
        ),
    }
}

fn scale_sigmoid_counts(counts: &mut SigmoidCounts, w: f64) {
    for v in counts
        .recovered
        .iter_mut()
        .chain(counts.stayed_infected.iter_mut())
    {
        *v *= w;
    }
    for row in counts
        .infected_at
        .iter_mut()
        .chain(counts.stayed_at.iter_mut())
    {
        for v in row.iter_mut() {
            *v *= w;
        }
    }
}

/// Run the full EM loop.
pub fn run_bgem(
    network: &DynamicNetwork,
    symptoms: &SymptomTensor,
    covariates: &CovariateMatrix,
    config: &BgemConfig,
) -> Result<BgemResult> {
    if config.burn_in >= config.samples_per_estep {
        return Err(Error::domain("burn-in must leave at least one sample"));
    }
    if covariates.n_people() != network.n_people() {
        return Err(Error::domain("covariate rows must match the person count"));
    }
    if config.link == BgemLink::Sigmoid && config.beta_interp == BetaInterpretation::Transmit {
        return Err(Error::domain(
            "the sigmoid link supports the receive interpretation only",
        ));
    }
    let k = covariates.dim();
    let prior = match &config.prior {
        Some(p) => {
            if p.dim() != k {
                return Err(Error::domain("prior dimension must match the covariates"));
            }
            p.clone()
        }
        None => GaussianPrior::isotropic(k, 10.0),
    };

    let dim = stacked_len(config.link, k);
    // Start at the prior mean, repeated over the role blocks.
    let mut eta: Vec<f64> = prior.mean.iter().cycle().take(dim).copied().collect();
    let gibbs_config = GibbsConfig {
        iterations: config.samples_per_estep,
        burn_in: Some(config.burn_in),
        beta_interp: config.beta_interp,
        aux_mode: AuxSourceMode::DropBoth,
        seed: config.seed,
        ..Default::default()
    };
    let link_eta = unstack_eta(config.link, k, &eta)?;
    let mut sampler = GibbsSampler::new(
        network,
        symptoms,
        Some(covariates),
        param_update_for(config.link, &link_eta, covariates, config.hyper)?,
        &gibbs_config,
    )?;

    let mut diagnostics = BgemDiagnostics {
        iterations: Vec::new(),
        converged: false,
        warnings: Vec::new(),
    };
    let mut mean_infected = Array2::zeros((network.n_people(), network.n_days() + 1));

    for iteration in 1..=config.max_em_iters {
        let link_eta = unstack_eta(config.link, k, &eta)?;
        sampler.set_param_update(param_update_for(
            config.link,
            &link_eta,
            covariates,
            config.hyper,
        )?)?;
        let data = run_e_step(&mut sampler, network, config)?;
        mean_infected = data.mean_infected.clone();

        let fast_counts;
        let fast_table;
        let scaled_table;
        let average_target = if config.fast_binary {
            let (states, aux) = fast_pseudo_sample(&data, network, config.beta_interp);
            match config.link {
                BgemLink::BetaExp => {
                    fast_counts =
                        count_statistics(&states, &aux, network, config.beta_interp)?;
                    MStepObjective::BetaExpOne(&fast_counts)
                }
                BgemLink::Sigmoid => {
                    fast_table = SigmoidCounts::from_states(&states, network);
                    MStepObjective::Sigmoid(&fast_table)
                }
            }
        } else {
            match config.link {
                BgemLink::BetaExp => MStepObjective::BetaExpMany(&data.count_samples),
                BgemLink::Sigmoid => {
                    let mut table = data.sigmoid_sum.clone();
                    scale_sigmoid_counts(&mut table, 1.0 / data.kept as f64);
                    scaled_table = table;
                    MStepObjective::Sigmoid(&scaled_table)
                }
            }
        };
        let average_report =
            optimize(average_target, covariates, &prior, &eta, config.newton_inner)?;

        let last_report = match config.link {
            BgemLink::BetaExp => optimize(
                MStepObjective::BetaExpOne(data.last_counts.as_ref().unwrap()),
                covariates,
                &prior,
                &eta,
                config.newton_inner,
            )?,
            BgemLink::Sigmoid => optimize(
                MStepObjective::Sigmoid(data.last_sigmoid.as_ref().unwrap()),
                covariates,
                &prior,
                &eta,
                config.newton_inner,
            )?,
        };

        for w in average_report
            .warnings
            .iter()
            .chain(last_report.warnings.iter())
        {
            diagnostics
                .warnings
                .push(format!("iteration {iteration}: {w}"));
        }

        let delta = step_size_schedule(iteration);
        let next = combine_eta(&average_report.eta, &last_report.eta, delta);
        let change = next
            .iter()
            .zip(eta.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        diagnostics.iterations.push(BgemIterDiag {
            iteration,
            step_size: delta,
            q_average: average_report.value,
            q_last_sample: last_report.value,
            grad_norm_average: average_report.grad_inf_norm,
            grad_norm_last_sample: last_report.grad_inf_norm,
            eta_change: change,
        });
        eta = next;
        if change < config.eta_tol {
            diagnostics.converged = true;
            break;
        }
    }

    let eta = unstack_eta(config.link, k, &eta)?;
    let (gamma, alpha, beta) = implied_params(&eta, covariates)?;
    Ok(BgemResult {
        eta,
        gamma,
        alpha,
        beta,
        mean_infected,
        diagnostics,
    })
}
