//! Log-likelihoods of the coefficient vectors with analytic gradients and
//! Hessians.
//!
//! Under the beta-exponential link the infection parameters integrate out
//! of the complete-data likelihood, leaving one log-beta-function ratio
//! per person and role with shape parameters `exp(z·η) + count`. Under the
//! sigmoid link the parameters are deterministic and the complete-data
//! likelihood is evaluated directly from transition counts grouped by
//! exposure. Both objectives add an independent Gaussian log-prior per
//! coefficient vector.

use ndarray::Array2;

use crate::data::CovariateMatrix;
use crate::error::{Error, Result};
use crate::gibbs::{infection_param_posterior, CountStatistics};
use crate::linalg::{cholesky, cholesky_solve};
use crate::sim::BetaInterpretation;
use crate::special::{log_sigmoid, sigmoid};

/// Value, gradient and Hessian of an objective at one point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Array2<f64>,
}

impl ObjectiveEval {
    fn zeros(dim: usize) -> Self {
        ObjectiveEval {
            value: 0.0,
            gradient: vec![0.0; dim],
            hessian: Array2::zeros((dim, dim)),
        }
    }

    pub fn grad_inf_norm(&self) -> f64 {
        self.gradient.iter().fold(0.0, |a, g| a.max(g.abs()))
    }
}

/// Gaussian prior shared by every coefficient vector.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    pub mean: Vec<f64>,
    pub covariance: Array2<f64>,
    precision: Array2<f64>,
    log_norm: f64,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, covariance: Array2<f64>) -> Result<Self> {
        let k = mean.len();
        if covariance.dim() != (k, k) {
            return Err(Error::domain("prior covariance shape mismatch"));
        }
        let l = cholesky(&covariance)
            .ok_or_else(|| Error::domain("prior covariance must be positive definite"))?;
        let mut precision = Array2::zeros((k, k));
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            let col = cholesky_solve(&l, &e);
            for i in 0..k {
                precision[(i, j)] = col[i];
            }
        }
        let log_det: f64 = (0..k).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(GaussianPrior {
            mean,
            covariance,
            precision,
            log_norm,
        })
    }

    /// Zero-mean isotropic prior with the given variance.
    pub fn isotropic(k: usize, variance: f64) -> Self {
        Self::new(vec![0.0; k], Array2::eye(k) * variance).expect("diagonal covariance")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, v: &[f64]) -> f64 {
        let d: Vec<f64> = v.iter().zip(self.mean.iter()).map(|(a, m)| a - m).collect();
        let mut quad = 0.0;
        for i in 0..d.len() {
            for j in 0..d.len() {
                quad += d[i] * self.precision[(i, j)] * d[j];
            }
        }
        self.log_norm - 0.5 * quad
    }

    /// Add the log-density, its gradient and Hessian for the block of
    /// `eval` starting at `offset`.
    fn accumulate(&self, eval: &mut ObjectiveEval, eta: &[f64], offset: usize) {
        let k = self.dim();
        let block = &eta[offset..offset + k];
        eval.value += self.log_density(block);
        for i in 0..k {
            let mut g = 0.0;
            for j in 0..k {
                g -= self.precision[(i, j)] * (block[j] - self.mean[j]);
                eval.hessian[(offset + i, offset + j)] -= self.precision[(i, j)];
            }
            eval.gradient[offset + i] += g;
        }
    }
}

/// Stacked coefficient layout: role blocks of width K each.
pub fn stacked_dim(n_roles: usize, k: usize) -> usize {
    n_roles * k
}

const EXP_OVERFLOW: f64 = 700.0;

/// One integrated beta-ratio block:
/// `ln B(e^u + c1, e^v + c2) − ln B(e^u, e^v)` plus its first and second
/// derivatives with respect to (u, v).
struct BetaRatioTerm {
    value: f64,
    du: f64,
    dv: f64,
    duu: f64,
    duv: f64,
    dvv: f64,
}

/// `lgamma(x + c) − lgamma(x)` as an exact finite sum for integer c.
fn lgamma_shift(x: f64, c: u64) -> f64 {
    (0..c).map(|i| (x + i as f64).ln()).sum()
}

/// `ψ(x + c) − ψ(x)` as an exact finite sum for integer c.
fn digamma_shift(x: f64, c: u64) -> f64 {
    (0..c).map(|i| 1.0 / (x + i as f64)).sum()
}

/// `ψ′(x + c) − ψ′(x)` as an exact finite sum for integer c.
fn trigamma_shift(x: f64, c: u64) -> f64 {
    -(0..c)
        .map(|i| {
            let t = x + i as f64;
            1.0 / (t * t)
        })
        .sum::<f64>()
}

fn beta_ratio_term(u: f64, v: f64, c1: f64, c2: f64) -> Result<BetaRatioTerm> {
    if u > EXP_OVERFLOW || v > EXP_OVERFLOW {
        return Err(Error::numerical(
            "link exponent overflow; rescale the covariates",
        ));
    }
    // Counts are event tallies; exploit their integrality to express every
    // gamma-function difference as a finite sum. Unlike lgamma/digamma
    // differences, these stay exact however large the shapes get.
    debug_assert!(c1.fract() == 0.0 && c2.fract() == 0.0);
    let (n1, n2) = (c1 as u64, c2 as u64);
    let n12 = n1 + n2;
    // Floor the shapes so deep line-search trials stay evaluable.
    let eu = u.max(-EXP_OVERFLOW).exp();
    let ev = v.max(-EXP_OVERFLOW).exp();
    let s = eu + ev;

    let value = lgamma_shift(eu, n1) + lgamma_shift(ev, n2) - lgamma_shift(s, n12);

    let dps_a = digamma_shift(eu, n1);
    let dps_b = digamma_shift(ev, n2);
    let dps_s = digamma_shift(s, n12);
    let du = eu * (dps_a - dps_s);
    let dv = ev * (dps_b - dps_s);

    let dtr_a = trigamma_shift(eu, n1);
    let dtr_b = trigamma_shift(ev, n2);
    let dtr_s = trigamma_shift(s, n12);
    let duu = du + eu * eu * (dtr_a - dtr_s);
    let dvv = dv + ev * ev * (dtr_b - dtr_s);
    let duv = -eu * ev * dtr_s;

    Ok(BetaRatioTerm {
        value,
        du,
        dv,
        duu,
        duv,
        dvv,
    })
}

fn add_rank_one(
    eval: &mut ObjectiveEval,
    z: &[f64],
    block_a: usize,
    block_b: usize,
    coef: f64,
) {
    let k = z.len();
    for i in 0..k {
        for j in 0..k {
            eval.hessian[(block_a * k + i, block_b * k + j)] += coef * z[i] * z[j];
        }
    }
}

fn beta_exp_eval(
    counts: &CountStatistics,
    covariates: &CovariateMatrix,
    eta: &[f64],
    prior: &GaussianPrior,
) -> Result<ObjectiveEval> {
    let k = covariates.dim();
    let dim = stacked_dim(6, k);
    if eta.len() != dim {
        return Err(Error::domain(format!(
            "expected {dim} stacked coefficients, got {}",
            eta.len()
        )));
    }
    if prior.dim() != k {
        return Err(Error::domain("prior dimension mismatch"));
    }
    let mut eval = ObjectiveEval::zeros(dim);
    for block in 0..6 {
        prior.accumulate(&mut eval, eta, block * k);
    }

    for person in 0..covariates.n_people() {
        let z: Vec<f64> = covariates.row(person).to_vec();
        // (success, failure) counts per role, from the same mapping that
        // shapes the conjugate posteriors.
        let pairs = infection_param_posterior(
            &counts.per_person[person],
            counts.mode,
            (0.0, 0.0),
            (0.0, 0.0),
            (0.0, 0.0),
        );
        for (role, (c1, c2)) in pairs.iter().enumerate() {
            let (b1, b2) = (2 * role, 2 * role + 1);
            let dot = |block: usize| -> f64 {
                z.iter()
                    .zip(eta[block * k..(block + 1) * k].iter())
                    .map(|(a, b)| a * b)
                    .sum()
            };
            let term = beta_ratio_term(dot(b1), dot(b2), *c1, *c2)?;
            eval.value += term.value;
            for (i, &zi) in z.iter().enumerate() {
                eval.gradient[b1 * k + i] += term.du * zi;
                eval.gradient[b2 * k + i] += term.dv * zi;
            }
            add_rank_one(&mut eval, &z, b1, b1, term.duu);
            add_rank_one(&mut eval, &z, b2, b2, term.dvv);
            add_rank_one(&mut eval, &z, b1, b2, term.duv);
            add_rank_one(&mut eval, &z, b2, b1, term.duv);
        }
    }
    Ok(eval)
}

/// Integrated complete-data log-likelihood of the stacked coefficients
/// `[r₁ r₂ a₁ a₂ b₁ b₂]` under the receive interpretation.
pub fn log_likelihood_beta_exp(
    counts: &CountStatistics,
    covariates: &CovariateMatrix,
    eta: &[f64],
    prior: &GaussianPrior,
) -> Result<ObjectiveEval> {
    if counts.mode != BetaInterpretation::Receive {
        return Err(Error::domain("receive-mode counts required"));
    }
    beta_exp_eval(counts, covariates, eta, prior)
}

/// Integrated complete-data log-likelihood under the transmit
/// interpretation: the β block counts infections this person caused
/// against the exposures they declined.
pub fn log_likelihood_beta_exp_transmit(
    counts: &CountStatistics,
    covariates: &CovariateMatrix,
    eta: &[f64],
    prior: &GaussianPrior,
) -> Result<ObjectiveEval> {
    if counts.mode != BetaInterpretation::Transmit {
        return Err(Error::domain("transmit-mode counts required"));
    }
    beta_exp_eval(counts, covariates, eta, prior)
}

/// Dispatch on the interpretation recorded in the counts.
pub(crate) fn log_likelihood_beta_exp_any(
    counts: &CountStatistics,
    covariates: &CovariateMatrix,
    eta: &[f64],
    prior: &GaussianPrior,
) -> Result<ObjectiveEval> {
    beta_exp_eval(counts, covariates, eta, prior)
}

/// Transition counts grouped the way the sigmoid likelihood consumes
/// them: recover/stay pairs per person, plus 0→1 / 0→0 events per person
/// and exposure count. Weights are real so sample averages can be folded
/// in place.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidCounts {
    pub recovered: Vec<f64>,
    pub stayed_infected: Vec<f64>,
    /// `infected_at[person][c]`: 0→1 events with exposure count c.
    pub infected_at: Vec<Vec<f64>>,
    /// `stayed_at[person][c]`: 0→0 events with exposure count c.
    pub stayed_at: Vec<Vec<f64>>,
}

impl SigmoidCounts {
    pub fn zeros(n_people: usize, max_exposure: usize) -> Self {
        SigmoidCounts {
            recovered: vec![0.0; n_people],
            stayed_infected: vec![0.0; n_people],
            infected_at: vec![vec![0.0; max_exposure + 1]; n_people],
            stayed_at: vec![vec![0.0; max_exposure + 1]; n_people],
        }
    }

    /// Tally one state matrix with weight `w`.
    pub fn accumulate(
        &mut self,
        states: &crate::data::StateMatrix,
        network: &crate::data::DynamicNetwork,
        w: f64,
    ) {
        for person in 0..states.n_people() {
            for day in 1..=states.n_days() {
                let prev = states.get(person, day - 1);
                let cur = states.get(person, day);
                if prev == 1 {
                    if cur == 0 {
                        self.recovered[person] += w;
                    } else {
                        self.stayed_infected[person] += w;
                    }
                } else {
                    let c = crate::data::exposure_count(states, network, person, day);
                    if cur == 1 {
                        self.infected_at[person][c] += w;
                    } else {
                        self.stayed_at[person][c] += w;
                    }
                }
            }
        }
    }

    pub fn from_states(
        states: &crate::data::StateMatrix,
        network: &crate::data::DynamicNetwork,
    ) -> Self {
        let mut counts = Self::zeros(states.n_people(), network.max_degree());
        counts.accumulate(states, network, 1.0);
        counts
    }
}

/// Exact complete-data log-likelihood of the stacked sigmoid coefficients
/// `[r a b]`: recovery terms are Bernoulli in σ(z·η_r); susceptible
/// transitions use the infection probability
/// `1 − (1−σ(z·η_a))(1−σ(z·η_b))^c`.
pub fn log_likelihood_sigmoid(
    counts: &SigmoidCounts,
    covariates: &CovariateMatrix,
    eta: &[f64],
    prior: &GaussianPrior,
) -> Result<ObjectiveEval> {
    let k = covariates.dim();
    let dim = stacked_dim(3, k);
    if eta.len() != dim {
        return Err(Error::domain(format!(
            "expected {dim} stacked coefficients, got {}",
            eta.len()
        )));
    }
    if prior.dim() != k {
        return Err(Error::domain("prior dimension mismatch"));
    }
    let mut eval = ObjectiveEval::zeros(dim);
    for block in 0..3 {
        prior.accumulate(&mut eval, eta, block * k);
    }

    for person in 0..covariates.n_people() {
        let z: Vec<f64> = covariates.row(person).to_vec();
        let dot = |block: usize| -> f64 {
            z.iter()
                .zip(eta[block * k..(block + 1) * k].iter())
                .map(|(a, b)| a * b)
                .sum()
        };
        let (u_r, u_a, u_b) = (dot(0), dot(1), dot(2));
        let (s_r, s_a, s_b) = (sigmoid(u_r), sigmoid(u_a), sigmoid(u_b));

        // Recovery block: n10·ln σ + n11·ln(1−σ).
        let n10 = counts.recovered[person];
        let n11 = counts.stayed_infected[person];
        if n10 != 0.0 || n11 != 0.0 {
            eval.value += n10 * log_sigmoid(u_r) + n11 * log_sigmoid(-u_r);
            let g = n10 * (1.0 - s_r) - n11 * s_r;
            let h = -(n10 + n11) * s_r * (1.0 - s_r);
            for (i, &zi) in z.iter().enumerate() {
                eval.gradient[i] += g * zi;
            }
            add_rank_one(&mut eval, &z, 0, 0, h);
        }

        // Susceptible blocks, grouped by exposure count.
        let log1m_sb = log_sigmoid(-u_b); // ln(1−σ(u_b))
        let mut g_a = 0.0;
        let mut g_b = 0.0;
        let mut h_aa = 0.0;
        let mut h_ab = 0.0;
        let mut h_bb = 0.0;
        for c in 0..counts.infected_at[person].len() {
            let k01 = counts.infected_at[person][c];
            let k00 = counts.stayed_at[person][c];
            if k01 == 0.0 && k00 == 0.0 {
                continue;
            }
            let cf = c as f64;
            // Survival of the whole exposure: q = (1−s_a)(1−s_b)^c.
            let log_q = log_sigmoid(-u_a) + cf * log1m_sb;
            let q = log_q.exp();
            let one_minus_q = (-log_q.exp_m1()).max(1e-300);

            if k00 != 0.0 {
                eval.value += k00 * log_q;
                g_a -= k00 * s_a;
                g_b -= k00 * cf * s_b;
                h_aa -= k00 * s_a * (1.0 - s_a);
                h_bb -= k00 * cf * s_b * (1.0 - s_b);
            }
            if k01 != 0.0 {
                eval.value += k01 * one_minus_q.ln();
                let phi = q / one_minus_q;
                let dphi = q / (one_minus_q * one_minus_q);
                g_a += k01 * s_a * phi;
                g_b += k01 * cf * s_b * phi;
                h_aa += k01 * (s_a * (1.0 - s_a) * phi - s_a * s_a * dphi);
                h_bb += k01
                    * (cf * s_b * (1.0 - s_b) * phi - cf * cf * s_b * s_b * dphi);
                h_ab -= k01 * cf * s_a * s_b * dphi;
            }
        }
        for (i, &zi) in z.iter().enumerate() {
            eval.gradient[k + i] += g_a * zi;
            eval.gradient[2 * k + i] += g_b * zi;
        }
        add_rank_one(&mut eval, &z, 1, 1, h_aa);
        add_rank_one(&mut eval, &z, 2, 2, h_bb);
        add_rank_one(&mut eval, &z, 1, 2, h_ab);
        add_rank_one(&mut eval, &z, 2, 1, h_ab);
    }
    Ok(eval)
}

/// Average several evaluations of the same objective over per-sample
/// counts: value, gradient and Hessian are all linear in the terms.
pub fn average_evals(evals: Vec<ObjectiveEval>) -> Result<ObjectiveEval> {
    let n = evals.len();
    if n == 0 {
        return Err(Error::domain("no samples to average"));
    }
    let mut iter = evals.into_iter();
    let mut acc = iter.next().unwrap();
    for e in iter {
        acc.value += e.value;
        for (a, g) in acc.gradient.iter_mut().zip(e.gradient.iter()) {
            *a += g;
        }
        acc.hessian += &e.hessian;
    }
    let scale = 1.0 / n as f64;
    acc.value *= scale;
    for g in acc.gradient.iter_mut() {
        *g *= scale;
    }
    acc.hessian *= scale;
    Ok(acc)
}
