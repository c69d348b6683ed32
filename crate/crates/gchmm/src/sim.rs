//! Forward simulation of the epidemic model and its transition/link
//! functions.
//!
//! Each person runs a binary susceptible/infectious chain. The transition
//! into day `t` conditions on the person's own day-`t−1` state and on the
//! day-`t−1` states of their contacts in `G_t`: an infectious person
//! recovers with probability γ, a susceptible person is infected with
//! probability `1 − (1−α)(1−β)^C` where `C` counts infectious contacts.
//! Symptoms are emitted from the day's state through a shared matrix θ.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::data::{CovariateMatrix, DynamicNetwork, StateMatrix, SymptomTensor};
use crate::error::{Error, Result};
use crate::special::sigmoid;

/// Per-person infection parameters plus the shared initial rate and
/// emission matrix. In the homogeneous setting all rows are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct InfectionParams {
    /// Recovery probability per person.
    pub gamma: Vec<f64>,
    /// Outside-network infection probability per person.
    pub alpha: Vec<f64>,
    /// In-network infection probability per person.
    pub beta: Vec<f64>,
    /// Initial infection rate.
    pub pi: f64,
    /// Emission probabilities, 2 × S: `theta[(state, symptom)]`.
    pub theta: Array2<f64>,
}

impl InfectionParams {
    pub fn new(
        gamma: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        pi: f64,
        theta: Array2<f64>,
    ) -> Result<Self> {
        let n = gamma.len();
        if alpha.len() != n || beta.len() != n {
            return Err(Error::domain("parameter vectors must share a length"));
        }
        let p = InfectionParams {
            gamma,
            alpha,
            beta,
            pi,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Homogeneous parameter set broadcast over `n_people`.
    pub fn homogeneous(
        n_people: usize,
        gamma: f64,
        alpha: f64,
        beta: f64,
        pi: f64,
        theta: Array2<f64>,
    ) -> Result<Self> {
        Self::new(
            vec![gamma; n_people],
            vec![alpha; n_people],
            vec![beta; n_people],
            pi,
            theta,
        )
    }

    pub fn n_people(&self) -> usize {
        self.gamma.len()
    }

    pub fn n_symptoms(&self) -> usize {
        self.theta.ncols()
    }

    fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(self.pi) {
            return Err(Error::domain("pi must lie in [0, 1]"));
        }
        for v in self
            .gamma
            .iter()
            .chain(self.alpha.iter())
            .chain(self.beta.iter())
            .chain(self.theta.iter())
        {
            if !v.is_finite() || !in_unit(*v) {
                return Err(Error::domain("parameters must lie in [0, 1]"));
            }
        }
        if self.theta.nrows() != 2 {
            return Err(Error::domain("theta needs exactly two state rows"));
        }
        Ok(())
    }
}

/// How in-network infection pressure is parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaInterpretation {
    /// β of the susceptible person: infection probability per infectious
    /// contact, so pressure depends only on the contact count.
    Receive,
    /// β of each infectious contact: their probability of passing
    /// infection on, so pressure depends on who the contacts are.
    Transmit,
}

/// Exposure of a susceptible person for one transition.
#[derive(Debug, Clone)]
pub enum Exposure<'a> {
    /// Number of infectious contacts (receive interpretation).
    Count(usize),
    /// β of each infectious contact (transmit interpretation).
    NeighborBetas(&'a [f64]),
}

/// Infection probability `1 − (1−α)(1−β)^C` for a susceptible person with
/// `count` infectious contacts.
pub fn infection_probability(alpha: f64, beta: f64, count: usize) -> f64 {
    1.0 - (1.0 - alpha) * (1.0 - beta).powi(count as i32)
}

/// Transmit-interpretation infection probability
/// `1 − (1−α)·Π (1−β_{n'})` over the infectious contacts' own β.
pub fn infection_probability_transmit(alpha: f64, neighbor_betas: &[f64]) -> f64 {
    let survive: f64 = neighbor_betas.iter().map(|b| 1.0 - b).product();
    1.0 - (1.0 - alpha) * survive
}

/// One case of the transition function: probability of `next` given
/// `prev`, the person's parameters and their exposure.
pub fn transition_prob(
    prev: u8,
    next: u8,
    gamma: f64,
    alpha: f64,
    beta: f64,
    exposure: &Exposure,
) -> Result<f64> {
    if prev > 1 || next > 1 {
        return Err(Error::domain("states must be 0 or 1"));
    }
    let p = match (prev, next) {
        (1, 0) => gamma,
        (1, 1) => 1.0 - gamma,
        (0, next) => {
            let infect = match exposure {
                Exposure::Count(c) => infection_probability(alpha, beta, *c),
                Exposure::NeighborBetas(bs) => infection_probability_transmit(alpha, bs),
            };
            if next == 1 {
                infect
            } else {
                1.0 - infect
            }
        }
        _ => unreachable!(),
    };
    Ok(p)
}

/// Regression coefficients mapping covariates to infection parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "link", rename_all = "snake_case")]
pub enum LinkCoefficients {
    /// Deterministic link: each parameter is σ(z·η) of one vector.
    Sigmoid {
        recovery: Vec<f64>,
        outside: Vec<f64>,
        inside: Vec<f64>,
    },
    /// Stochastic link: each parameter is drawn from
    /// Beta(exp(z·η₁), exp(z·η₂)).
    BetaExp {
        recovery: [Vec<f64>; 2],
        outside: [Vec<f64>; 2],
        inside: [Vec<f64>; 2],
    },
}

impl LinkCoefficients {
    /// All-zero sigmoid coefficients of dimension `k`.
    pub fn zero_sigmoid(k: usize) -> Self {
        LinkCoefficients::Sigmoid {
            recovery: vec![0.0; k],
            outside: vec![0.0; k],
            inside: vec![0.0; k],
        }
    }

    /// All-zero beta-exponential coefficients of dimension `k`.
    pub fn zero_beta_exp(k: usize) -> Self {
        let z = || [vec![0.0; k], vec![0.0; k]];
        LinkCoefficients::BetaExp {
            recovery: z(),
            outside: z(),
            inside: z(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LinkCoefficients::Sigmoid { recovery, .. } => recovery.len(),
            LinkCoefficients::BetaExp { recovery, .. } => recovery[0].len(),
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let check = |v: &Vec<f64>| -> Result<()> {
            if v.len() != k {
                return Err(Error::domain(format!(
                    "coefficient vector has length {}, expected {k}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::domain("coefficients must be finite"));
            }
            Ok(())
        };
        match self {
            LinkCoefficients::Sigmoid {
                recovery,
                outside,
                inside,
            } => {
                check(recovery)?;
                check(outside)?;
                check(inside)
            }
            LinkCoefficients::BetaExp {
                recovery,
                outside,
                inside,
            } => {
                for pair in [recovery, outside, inside] {
                    check(&pair[0])?;
                    check(&pair[1])?;
                }
                Ok(())
            }
        }
    }
}

/// Deterministic sigmoid link: one parameter row from one covariate row.
pub fn sigmoid_link(z: &[f64], eta: &LinkCoefficients) -> Result<(f64, f64, f64)> {
    match eta {
        LinkCoefficients::Sigmoid {
            recovery,
            outside,
            inside,
        } => {
            if recovery.len() != z.len() {
                return Err(Error::domain("covariate/coefficient dimension mismatch"));
            }
            let dot = |e: &[f64]| z.iter().zip(e.iter()).map(|(a, b)| a * b).sum::<f64>();
            Ok((sigmoid(dot(recovery)), sigmoid(dot(outside)), sigmoid(dot(inside))))
        }
        LinkCoefficients::BetaExp { .. } => {
            Err(Error::domain("sigmoid_link needs sigmoid coefficients"))
        }
    }
}

/// Stochastic beta-exponential link: draw one parameter row from
/// Beta(exp(z·η₁), exp(z·η₂)) per parameter. Deterministic given the rng
/// state.
pub fn beta_exp_link_draw<R: Rng>(
    z: &[f64],
    eta: &LinkCoefficients,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    match eta {
        LinkCoefficients::BetaExp {
            recovery,
            outside,
            inside,
        } => {
            let mut draw = |pair: &[Vec<f64>; 2]| -> Result<f64> {
                if pair[0].len() != z.len() || pair[1].len() != z.len() {
                    return Err(Error::domain("covariate/coefficient dimension mismatch"));
                }
                let dot = |e: &[f64]| z.iter().zip(e.iter()).map(|(a, b)| a * b).sum::<f64>();
                let a = dot(&pair[0]).exp();
                let b = dot(&pair[1]).exp();
                let dist = rand_distr::Beta::new(a, b)
                    .map_err(|e| Error::numerical(format!("beta shape: {e}")))?;
                Ok(dist.sample(rng))
            };
            Ok((draw(recovery)?, draw(outside)?, draw(inside)?))
        }
        LinkCoefficients::Sigmoid { .. } => {
            Err(Error::domain("beta_exp_link_draw needs beta-exponential coefficients"))
        }
    }
}

/// Where the simulation's ground-truth parameters come from.
#[derive(Debug, Clone)]
pub enum ParamSource {
    /// Fixed, already-realized parameters.
    Fixed(InfectionParams),
    /// Parameters produced from covariates through a link; the initial rate
    /// and emission matrix are not covariate-linked and are given directly.
    Link {
        eta: LinkCoefficients,
        pi: f64,
        theta: Array2<f64>,
    },
}

/// Simulation settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub beta_interp: BetaInterpretation,
    /// Probability that an emitted observation is masked as missing.
    pub p_miss: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            beta_interp: BetaInterpretation::Receive,
            p_miss: 0.0,
            seed: 0,
        }
    }
}

/// Output of [`simulate`]: the hidden trajectory, the (unmasked) symptom
/// tensor and the realized per-person parameters.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub states: StateMatrix,
    pub symptoms: SymptomTensor,
    pub params: InfectionParams,
    pub warnings: Vec<String>,
}

/// Forward-simulate hidden states and symptoms over the network.
///
/// Each person owns an rng substream, so adding people leaves existing
/// trajectories untouched and per-person draws within a timestep are
/// schedule-independent.
pub fn simulate(
    network: &DynamicNetwork,
    covariates: Option<&CovariateMatrix>,
    source: &ParamSource,
    config: &SimConfig,
    n_symptoms: usize,
) -> Result<SimOutput> {
    let n = network.n_people();
    let t_days = network.n_days();
    let mut warnings = Vec::new();

    let mut person_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(1 + i as u64);
            r
        })
        .collect();

    // Realize parameters.
    let params = match source {
        ParamSource::Fixed(p) => {
            if p.n_people() != n {
                return Err(Error::domain("parameter rows must match the person count"));
            }
            p.clone()
        }
        ParamSource::Link { eta, pi, theta } => {
            let z = covariates
                .ok_or_else(|| Error::domain("link simulation needs covariates"))?;
            if z.n_people() != n {
                return Err(Error::domain("covariate rows must match the person count"));
            }
            eta.validate(z.dim())?;
            let mut gamma = Vec::with_capacity(n);
            let mut alpha = Vec::with_capacity(n);
            let mut beta = Vec::with_capacity(n);
            match eta {
                LinkCoefficients::Sigmoid { .. } => {
                    for i in 0..n {
                        let row: Vec<f64> = z.row(i).to_vec();
                        let (g, a, b) = sigmoid_link(&row, eta)?;
                        gamma.push(g);
                        alpha.push(a);
                        beta.push(b);
                    }
                }
                LinkCoefficients::BetaExp { .. } => {
                    // A single realization of the stochastic link is not its
                    // expectation; flag ground-truth simulations that use it.
                    warnings.push(
                        "beta-exponential link used for ground-truth simulation: realized \
                         parameters are one draw from the link, not its expectation"
                            .to_string(),
                    );
                    for (i, rng) in person_rngs.iter_mut().enumerate() {
                        let row: Vec<f64> = z.row(i).to_vec();
                        let (g, a, b) = beta_exp_link_draw(&row, eta, rng)?;
                        gamma.push(g);
                        alpha.push(a);
                        beta.push(b);
                    }
                }
            }
            InfectionParams::new(gamma, alpha, beta, *pi, theta.clone())?
        }
    };
    if params.n_symptoms() != n_symptoms {
        return Err(Error::domain("theta columns must match the symptom count"));
    }

    // Pre-draw the uniform variates each person consumes: one for the
    // initial state, then one transition + S emissions per day. The
    // dynamics loop is then a pure function of these tables.
    let uniforms: Vec<Vec<f64>> = person_rngs
        .iter_mut()
        .map(|r| {
            (0..1 + t_days * (1 + n_symptoms))
                .map(|_| r.random::<f64>())
                .collect()
        })
        .collect();

    let mut states = StateMatrix::zeros(n, t_days);
    let mut symptoms = SymptomTensor::missing(n, t_days, n_symptoms);

    for i in 0..n {
        states.set(i, 0, u8::from(uniforms[i][0] < params.pi));
    }

    for t in 1..=t_days {
        let prev: Vec<u8> = (0..n).map(|i| states.get(i, t - 1)).collect();
        let next: Vec<u8> = crate::exec::map_collect(n, |i| {
            let base = 1 + (t - 1) * (1 + n_symptoms);
            let u = uniforms[i][base];
            let p_next1 = if prev[i] == 1 {
                1.0 - params.gamma[i]
            } else {
                match config.beta_interp {
                    BetaInterpretation::Receive => {
                        let c = network
                            .neighbors(t, i)
                            .iter()
                            .filter(|&&m| prev[m] == 1)
                            .count();
                        infection_probability(params.alpha[i], params.beta[i], c)
                    }
                    BetaInterpretation::Transmit => {
                        let betas: Vec<f64> = network
                            .neighbors(t, i)
                            .iter()
                            .filter(|&&m| prev[m] == 1)
                            .map(|&m| params.beta[m])
                            .collect();
                        infection_probability_transmit(params.alpha[i], &betas)
                    }
                }
            };
            u8::from(u < p_next1)
        });
        for i in 0..n {
            states.set(i, t, next[i]);
            let base = 1 + (t - 1) * (1 + n_symptoms);
            for s in 0..n_symptoms {
                let u = uniforms[i][base + 1 + s];
                let p = params.theta[(next[i] as usize, s)];
                symptoms.set(i, t, s, Some(u8::from(u < p)));
            }
        }
    }

    Ok(SimOutput {
        states,
        symptoms,
        params,
        warnings,
    })
}

/// Emission matrix with one rate per state, shared across symptoms.
pub fn two_level_theta(n_symptoms: usize, theta0: f64, theta1: f64) -> Array2<f64> {
    Array2::from_shape_fn((2, n_symptoms), |(state, _)| {
        if state == 0 {
            theta0
        } else {
            theta1
        }
    })
}

/// Seeded convenience wrapper around [`mask_missing`]; the stream is
/// derived from the seed so it does not collide with simulation draws.
pub fn mask_missing_seeded(
    symptoms: &SymptomTensor,
    p_miss: f64,
    seed: u64,
) -> Result<SymptomTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    mask_missing(symptoms, p_miss, &mut rng)
}

/// Mask each observed cell as missing independently with probability
/// `p_miss`. Deterministic given the rng state.
pub fn mask_missing<R: Rng>(
    symptoms: &SymptomTensor,
    p_miss: f64,
    rng: &mut R,
) -> Result<SymptomTensor> {
    if !(0.0..=1.0).contains(&p_miss) {
        return Err(Error::domain("p_miss must lie in [0, 1]"));
    }
    let mut out = symptoms.clone();
    for n in 0..symptoms.n_people() {
        for t in 1..=symptoms.n_days() {
            for s in 0..symptoms.n_symptoms() {
                if symptoms.get(n, t, s).is_some() && rng.random_bool(p_miss) {
                    out.set(n, t, s, None);
                }
            }
        }
    }
    Ok(out)
}
