//! EM for the homogeneous model: belief-propagation E-step, count-based
//! M-step.
//!
//! The E-step runs sum-product sweeps under the current parameters. The
//! M-step updates the initial rate and emission matrix from the factorized
//! marginals, then hard-assigns states by per-cell argmax and counts
//! transitions. Recovery is the 1→0 frequency. Outside/inside infection
//! rates come through a change of variable: the per-exposure survival
//! `τ_c = (1−α)(1−β)^c` is estimated as the conditional 0→0 frequency at
//! exposure count `c`, giving `α = 1 − τ_0` and one β estimate per
//! supported count, which are averaged.

use ndarray::Array2;

use crate::bp::{build_factor_graph, run_forward_backward, BpOptions};
use crate::data::{BetaHyperParams, DynamicNetwork, StateMatrix, SymptomTensor};
use crate::error::{Error, Result};
use crate::sim::InfectionParams;

const PARAM_FLOOR: f64 = 1e-6;

fn clamp_unit(v: f64) -> f64 {
    v.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR)
}

/// Homogeneous parameter set carried across EM iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct GbwParams {
    pub pi: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// 2 × S emission matrix.
    pub theta: Array2<f64>,
}

impl GbwParams {
    /// Neutral starting point: every rate at the same value, emissions at
    /// `0.4 / 0.6` so the two states are not exchangeable.
    pub fn neutral(n_symptoms: usize, rate: f64) -> Self {
        let mut theta = Array2::from_elem((2, n_symptoms), 0.4);
        for s in 0..n_symptoms {
            theta[(1, s)] = 0.6;
        }
        GbwParams {
            pi: rate,
            gamma: rate,
            alpha: rate,
            beta: rate,
            theta,
        }
    }

    pub fn broadcast(&self, n_people: usize) -> Result<InfectionParams> {
        InfectionParams::homogeneous(
            n_people,
            self.gamma,
            self.alpha,
            self.beta,
            self.pi,
            self.theta.clone(),
        )
    }

    fn max_change(&self, other: &GbwParams) -> f64 {
        let mut d = (self.pi - other.pi)
            .abs()
            .max((self.gamma - other.gamma).abs())
            .max((self.alpha - other.alpha).abs())
            .max((self.beta - other.beta).abs());
        for (a, b) in self.theta.iter().zip(other.theta.iter()) {
            d = d.max((a - b).abs());
        }
        d
    }

    fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !(open(self.pi) && open(self.gamma) && open(self.alpha) && open(self.beta))
            || self.theta.iter().any(|&v| !open(v))
        {
            return Err(Error::domain("initial parameters must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-cell argmax of the marginals; ties resolve to susceptible.
pub fn hard_assign(p_infected: &Array2<f64>) -> StateMatrix {
    let (n, cols) = p_infected.dim();
    let mut states = StateMatrix::zeros(n, cols - 1);
    for person in 0..n {
        for day in 0..cols {
            states.set(person, day, u8::from(p_infected[(person, day)] > 0.5));
        }
    }
    states
}

/// Closed-form updates for the initial rate and emission matrix from the
/// factorized marginals. Missing observations are excluded; an emission
/// cell with no posterior mass falls back to its prior mean.
pub fn m_step_pi_theta(
    p_infected: &Array2<f64>,
    symptoms: &SymptomTensor,
    hyper: &BetaHyperParams,
) -> (f64, Array2<f64>) {
    let (n, _) = p_infected.dim();
    let pi = p_infected.column(0).sum() / n as f64;

    let s_count = symptoms.n_symptoms();
    let mut num = Array2::<f64>::zeros((2, s_count));
    let mut den = Array2::<f64>::zeros((2, s_count));
    for (person, day, s, y) in symptoms.observed_cells() {
        let p1 = p_infected[(person, day)];
        let w = [1.0 - p1, p1];
        for state in 0..2 {
            den[(state, s)] += w[state];
            if y == 1 {
                num[(state, s)] += w[state];
            }
        }
    }
    let mut theta = Array2::<f64>::zeros((2, s_count));
    let prior_mean = [
        hyper.theta0.0 / (hyper.theta0.0 + hyper.theta0.1),
        hyper.theta1.0 / (hyper.theta1.0 + hyper.theta1.1),
    ];
    for state in 0..2 {
        for s in 0..s_count {
            theta[(state, s)] = if den[(state, s)] > 0.0 {
                num[(state, s)] / den[(state, s)]
            } else {
                prior_mean[state]
            };
        }
    }
    (pi, theta)
}

/// Transition counts extracted from a hard assignment and the network.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    /// 1→0 transitions.
    pub recoveries: usize,
    /// Source cells in state 1 (denominator of the recovery rate).
    pub infected_sources: usize,
    /// `susceptible_at[c]`: source cells in state 0 with exposure count c.
    pub susceptible_at: Vec<usize>,
    /// `infected_from[c]`: 0→1 transitions at exposure count c.
    pub infected_from: Vec<usize>,
}

/// Count transitions of `states` against the exposure structure of the
/// network: for every person and day pair (t−1, t), the exposure count is
/// the number of day-(t−1) infected contacts in `G_t`.
pub fn transition_counts(states: &StateMatrix, network: &DynamicNetwork) -> TransitionCounts {
    let max_c = network.max_degree();
    let mut counts = TransitionCounts {
        recoveries: 0,
        infected_sources: 0,
        susceptible_at: vec![0; max_c + 1],
        infected_from: vec![0; max_c + 1],
    };
    for person in 0..states.n_people() {
        for day in 1..=states.n_days() {
            let prev = states.get(person, day - 1);
            let cur = states.get(person, day);
            if prev == 1 {
                counts.infected_sources += 1;
                if cur == 0 {
                    counts.recoveries += 1;
                }
            } else {
                let c = crate::data::exposure_count(states, network, person, day);
                counts.susceptible_at[c] += 1;
                if cur == 1 {
                    counts.infected_from[c] += 1;
                }
            }
        }
    }
    counts
}

/// Recovery rate from hard counts; `None` when no source cell was
/// infected, so the caller keeps the previous estimate.
pub fn m_step_gamma(counts: &TransitionCounts) -> Option<f64> {
    (counts.infected_sources > 0)
        .then(|| counts.recoveries as f64 / counts.infected_sources as f64)
}

/// Outside/inside infection rates from hard counts.
///
/// Returns the clamped estimates, the per-exposure survival estimates
/// actually used (diagnostics), and any clamp warnings. Exposure counts
/// with no susceptible support are skipped; with no support at all the
/// previous values are kept.
pub fn m_step_alpha_beta(
    counts: &TransitionCounts,
    prev_alpha: f64,
    prev_beta: f64,
) -> (f64, f64, Vec<(usize, f64)>, Vec<String>) {
    let mut warnings = Vec::new();

    let alpha = if counts.susceptible_at.first().copied().unwrap_or(0) > 0 {
        let raw = counts.infected_from[0] as f64 / counts.susceptible_at[0] as f64;
        let clamped = clamp_unit(raw);
        if clamped != raw {
            warnings.push(format!("outside rate estimate {raw} clamped to {clamped}"));
        }
        clamped
    } else {
        prev_alpha
    };

    let mut taus = Vec::new();
    let mut beta_terms = Vec::new();
    for c in 1..counts.susceptible_at.len() {
        let den = counts.susceptible_at[c];
        if den == 0 {
            continue;
        }
        let tau = (den - counts.infected_from[c]) as f64 / den as f64;
        taus.push((c, tau));
        let ratio = tau / (1.0 - alpha);
        let ratio = if !(ratio > 0.0 && ratio <= 1.0) {
            let clamped = clamp_unit(ratio);
            warnings.push(format!(
                "survival ratio {ratio} at exposure {c} clamped to {clamped}"
            ));
            clamped
        } else {
            ratio
        };
        beta_terms.push(1.0 - ratio.powf(1.0 / c as f64));
    }
    let beta = if beta_terms.is_empty() {
        prev_beta
    } else {
        clamp_unit(beta_terms.iter().sum::<f64>() / beta_terms.len() as f64)
    };
    (alpha, beta, taus, warnings)
}

/// Controls for [`run_gbw`].
#[derive(Debug, Clone)]
pub struct GbwOptions {
    pub max_iters: usize,
    /// Stop once the max-norm parameter change drops below this.
    pub param_tol: f64,
    /// Sweep budget of each E-step.
    pub bp: BpOptions,
    /// Freeze the parameters: a single E-step, no M-step.
    pub known_params: bool,
    pub hyper: BetaHyperParams,
}

impl Default for GbwOptions {
    fn default() -> Self {
        GbwOptions {
            max_iters: 15,
            param_tol: 1e-4,
            bp: BpOptions::default(),
            known_params: false,
            hyper: BetaHyperParams::flat(),
        }
    }
}

/// Result of an EM run.
#[derive(Debug, Clone)]
pub struct GbwResult {
    pub params: GbwParams,
    /// Marginals from the final E-step, N × (T+1).
    pub p_infected: Array2<f64>,
    pub hard_states: StateMatrix,
    pub iterations: usize,
    /// Max-norm parameter change per iteration.
    pub param_changes: Vec<f64>,
    /// Survival estimates by exposure count from the final M-step.
    pub tau: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

/// Alternate sum-product E-steps with count-based M-steps until the
/// parameters settle.
pub fn run_gbw(
    network: &DynamicNetwork,
    symptoms: &SymptomTensor,
    init: GbwParams,
    options: &GbwOptions,
) -> Result<GbwResult> {
    init.validate()?;
    let n = network.n_people();
    let s_count = symptoms.n_symptoms();
    let mut params = init;
    let mut warnings = Vec::new();
    let mut param_changes = Vec::new();
    let mut tau = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let graph = build_factor_graph(network, &params.broadcast(n)?, s_count)?;
        let bp_res = run_forward_backward(&graph, symptoms, &options.bp)?;

        if options.known_params {
            let hard_states = hard_assign(&bp_res.p_infected);
            return Ok(GbwResult {
                params,
                p_infected: bp_res.p_infected,
                hard_states,
                iterations,
                param_changes,
                tau,
                warnings,
            });
        }

        let (pi, theta) = m_step_pi_theta(&bp_res.p_infected, symptoms, &options.hyper);
        let hard_states = hard_assign(&bp_res.p_infected);
        let counts = transition_counts(&hard_states, network);
        let gamma = m_step_gamma(&counts).unwrap_or(params.gamma);
        let (alpha, beta, new_tau, mut alpha_beta_warnings) =
            m_step_alpha_beta(&counts, params.alpha, params.beta);
        warnings.append(&mut alpha_beta_warnings);
        tau = new_tau;

        let next = GbwParams {
            pi: clamp_unit(pi),
            gamma: clamp_unit(gamma),
            alpha,
            beta,
            theta: theta.mapv(clamp_unit),
        };
        let change = next.max_change(&params);
        param_changes.push(change);
        params = next;

        if change < options.param_tol || iterations >= options.max_iters {
            // One final E-step so the returned beliefs match the returned
            // parameters.
            let graph = build_factor_graph(network, &params.broadcast(n)?, s_count)?;
            let bp_res = run_forward_backward(&graph, symptoms, &options.bp)?;
            let hard_states = hard_assign(&bp_res.p_infected);
            return Ok(GbwResult {
                params,
                p_infected: bp_res.p_infected,
                hard_states,
                iterations,
                param_changes,
                tau,
                warnings,
            });
        }
    }
}
