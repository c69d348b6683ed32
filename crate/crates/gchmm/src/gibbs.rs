//! Blocked Gibbs sampling for the homogeneous and per-person models.
//!
//! Each sweep resamples, in fixed order: infection parameters, then every
//! hidden state in a (day, person) raster, then the auxiliary source
//! labels. Missing observations are marginalized out of the state
//! conditionals (a missing cell contributes a constant factor) and imputed
//! per sweep for reporting only.
//!
//! Auxiliary sources restore conjugacy: every 0→1 transition is labeled
//! with where the infection came from. Under the receive interpretation
//! the label is outside / inside / both, with the three probabilities
//! proportional to `α(1−β)^C`, `(1−α)(1−(1−β)^C)` and `α(1−(1−β)^C)`;
//! sampling defaults to dropping the "both" label, whose mass is
//! negligible for epidemic-scale rates. Under the transmit interpretation
//! the label is the infecting contact (or outside), which makes each
//! person's own β count successes over the transitions they could have
//! caused.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::data::{
    exposure_count, exposure_sources, BetaHyperParams, CovariateMatrix, DynamicNetwork,
    StateMatrix, SymptomTensor,
};
use crate::error::{Error, Result};
use crate::sim::{
    infection_probability, infection_probability_transmit, BetaInterpretation, InfectionParams,
    LinkCoefficients,
};

/// Where a 0→1 transition's infection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLabel {
    /// Outside the network.
    Outside,
    /// Inside the network (receive interpretation).
    Inside,
    /// Both inside and outside (receive interpretation, exact mode only).
    Both,
    /// A specific infectious contact (transmit interpretation).
    Neighbor(usize),
}

/// Source labels aligned with the transitions of a state matrix:
/// `label(person, t)` describes the `t → t+1` transition and is defined
/// exactly where `x[person][t] = 0` and `x[person][t+1] = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxSourceMatrix {
    labels: Vec<Vec<Option<SourceLabel>>>,
}

impl AuxSourceMatrix {
    pub fn empty(n_people: usize, n_days: usize) -> Self {
        AuxSourceMatrix {
            labels: vec![vec![None; n_days]; n_people],
        }
    }

    /// Label of the `t → t+1` transition, `t ∈ 0..T`.
    pub fn get(&self, person: usize, t: usize) -> Option<SourceLabel> {
        self.labels[person][t]
    }

    pub fn set(&mut self, person: usize, t: usize, label: Option<SourceLabel>) {
        self.labels[person][t] = label;
    }

    pub fn n_defined(&self) -> usize {
        self.labels
            .iter()
            .map(|row| row.iter().filter(|l| l.is_some()).count())
            .sum()
    }

    /// Check alignment with a state matrix: defined exactly on 0→1 cells.
    pub fn validate_against(&self, states: &StateMatrix) -> Result<()> {
        for person in 0..states.n_people() {
            for t in 0..states.n_days() {
                let is_event =
                    states.get(person, t) == 0 && states.get(person, t + 1) == 1;
                if is_event != self.labels[person][t].is_some() {
                    return Err(Error::domain(format!(
                        "source label misaligned with transitions at person {person}, t {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How the receive-mode source label is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AuxSourceMode {
    /// Treat the "both" label as probability zero and renormalize.
    #[default]
    DropBoth,
    /// Keep the exact three-term categorical.
    Exact,
}

/// Exact numerators of the receive-mode source categorical:
/// outside, inside, both. They sum to the infection probability.
pub fn source_numerators(alpha: f64, beta: f64, count: usize) -> [f64; 3] {
    let survive = (1.0 - beta).powi(count as i32);
    [
        alpha * survive,
        (1.0 - alpha) * (1.0 - survive),
        alpha * (1.0 - survive),
    ]
}

/// Small-rate approximations of the inside/both numerators
/// (`C(1−α)β` and `Cαβ`); the outside term is kept exact. These are the
/// conjugacy-friendly terms; their sum reproduces the infection
/// probability exactly only at `count = 1`.
pub fn approx_source_numerators(alpha: f64, beta: f64, count: usize) -> [f64; 3] {
    let c = count as f64;
    [
        alpha * (1.0 - beta).powi(count as i32),
        c * (1.0 - alpha) * beta,
        c * alpha * beta,
    ]
}

/// Normalized receive-mode source probabilities (outside, inside, both).
pub fn source_probabilities(
    alpha: f64,
    beta: f64,
    count: usize,
    mode: AuxSourceMode,
) -> [f64; 3] {
    if count == 0 {
        return [1.0, 0.0, 0.0];
    }
    let mut p = source_numerators(alpha, beta, count);
    if mode == AuxSourceMode::DropBoth {
        p[2] = 0.0;
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    [p[0] / total, p[1] / total, p[2] / total]
}

/// Transmit-mode source weights over `{outside} ∪ sources`, normalized.
/// `betas[i]` is the β of `sources[i]`.
pub fn source_probabilities_transmit(alpha: f64, betas: &[f64]) -> Vec<f64> {
    if betas.is_empty() {
        return vec![1.0];
    }
    let survive: f64 = betas.iter().map(|b| 1.0 - b).product();
    let mut w = Vec::with_capacity(betas.len() + 1);
    w.push(alpha * survive);
    for &b in betas {
        w.push((1.0 - alpha) * b);
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        w.fill(0.0);
        w[0] = 1.0;
        return w;
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Per-person event counts extracted from (states, labels, network).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PersonCounts {
    /// 0→0 transitions.
    pub stay_susceptible: usize,
    /// 0→1 transitions.
    pub infections: usize,
    /// 1→0 transitions.
    pub recoveries: usize,
    /// 1→1 transitions.
    pub stay_infected: usize,
    /// Receive: labels in {outside, both}. Transmit: outside labels.
    pub source_outside: usize,
    /// Receive: labels in {inside, both}. Transmit: neighbor labels.
    pub source_inside: usize,
    /// Receive only: strictly-inside labels.
    pub source_inside_strict: usize,
    /// Receive only: exposures that failed to transmit, summed over
    /// outside-labeled infections and 0→0 cells.
    pub survived_exposure: usize,
    /// Transmit only: infections of others attributed to this person.
    pub infected_others: usize,
    /// Transmit only: events where this person was an infectious contact
    /// and the target stayed susceptible or was infected from outside.
    pub declined_exposure: usize,
}

/// Count statistics for the whole population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountStatistics {
    pub mode: BetaInterpretation,
    pub per_person: Vec<PersonCounts>,
}

impl CountStatistics {
    pub fn pooled(&self) -> PersonCounts {
        let mut total = PersonCounts::default();
        for p in &self.per_person {
            total.stay_susceptible += p.stay_susceptible;
            total.infections += p.infections;
            total.recoveries += p.recoveries;
            total.stay_infected += p.stay_infected;
            total.source_outside += p.source_outside;
            total.source_inside += p.source_inside;
            total.source_inside_strict += p.source_inside_strict;
            total.survived_exposure += p.survived_exposure;
            total.infected_others += p.infected_others;
            total.declined_exposure += p.declined_exposure;
        }
        total
    }
}

/// Tally all count statistics against the state matrix and labels.
pub fn count_statistics(
    states: &StateMatrix,
    aux: &AuxSourceMatrix,
    network: &DynamicNetwork,
    mode: BetaInterpretation,
) -> Result<CountStatistics> {
    aux.validate_against(states)?;
    let n = states.n_people();
    let t_days = states.n_days();
    let mut per_person = vec![PersonCounts::default(); n];
    for person in 0..n {
        for t in 0..t_days {
            let prev = states.get(person, t);
            let cur = states.get(person, t + 1);
            let pc = &mut per_person[person];
            match (prev, cur) {
                (0, 0) => pc.stay_susceptible += 1,
                (0, 1) => pc.infections += 1,
                (1, 0) => pc.recoveries += 1,
                (1, 1) => pc.stay_infected += 1,
                _ => unreachable!(),
            }
            if prev == 0 {
                match mode {
                    BetaInterpretation::Receive => {
                        let c = exposure_count(states, network, person, t + 1);
                        match aux.get(person, t) {
                            Some(SourceLabel::Outside) => {
                                per_person[person].source_outside += 1;
                                per_person[person].survived_exposure += c;
                            }
                            Some(SourceLabel::Inside) => {
                                per_person[person].source_inside += 1;
                                per_person[person].source_inside_strict += 1;
                            }
                            Some(SourceLabel::Both) => {
                                per_person[person].source_outside += 1;
                                per_person[person].source_inside += 1;
                            }
                            Some(SourceLabel::Neighbor(_)) => {
                                return Err(Error::domain(
                                    "neighbor label in receive-mode statistics",
                                ))
                            }
                            None => {
                                // 0→0 cell: every exposure failed.
                                per_person[person].survived_exposure += c;
                            }
                        }
                    }
                    BetaInterpretation::Transmit => {
                        let sources = exposure_sources(states, network, person, t + 1);
                        match aux.get(person, t) {
                            Some(SourceLabel::Outside) => {
                                per_person[person].source_outside += 1;
                                for &m in &sources {
                                    per_person[m].declined_exposure += 1;
                                }
                            }
                            Some(SourceLabel::Neighbor(src)) => {
                                if !sources.contains(&src) {
                                    return Err(Error::domain(format!(
                                        "label names {src}, not an infectious contact"
                                    )));
                                }
                                per_person[person].source_inside += 1;
                                per_person[src].infected_others += 1;
                            }
                            Some(_) => {
                                return Err(Error::domain(
                                    "receive-mode label in transmit-mode statistics",
                                ))
                            }
                            None => {
                                for &m in &sources {
                                    per_person[m].declined_exposure += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(CountStatistics { mode, per_person })
}

/// Beta posterior parameters (success, failure) for one person's recovery,
/// outside and inside rates, given their prior shapes and counts.
pub fn infection_param_posterior(
    counts: &PersonCounts,
    mode: BetaInterpretation,
    prior_gamma: (f64, f64),
    prior_alpha: (f64, f64),
    prior_beta: (f64, f64),
) -> [(f64, f64); 3] {
    let gamma = (
        prior_gamma.0 + counts.recoveries as f64,
        prior_gamma.1 + counts.stay_infected as f64,
    );
    match mode {
        BetaInterpretation::Receive => [
            gamma,
            (
                prior_alpha.0 + counts.source_outside as f64,
                prior_alpha.1
                    + counts.source_inside_strict as f64
                    + counts.stay_susceptible as f64,
            ),
            (
                prior_beta.0 + counts.source_inside as f64,
                prior_beta.1 + counts.survived_exposure as f64,
            ),
        ],
        BetaInterpretation::Transmit => [
            gamma,
            (
                prior_alpha.0 + counts.source_outside as f64,
                prior_alpha.1 + counts.source_inside as f64 + counts.stay_susceptible as f64,
            ),
            (
                prior_beta.0 + counts.infected_others as f64,
                prior_beta.1 + counts.declined_exposure as f64,
            ),
        ],
    }
}

fn draw_beta<R: Rng>(rng: &mut R, shape: (f64, f64)) -> Result<f64> {
    let dist = rand_distr::Beta::new(shape.0, shape.1)
        .map_err(|e| Error::numerical(format!("beta posterior shape {shape:?}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Prior shapes for one person's (recovery, outside, inside) rates under
/// the exponential link: `exp(z·η)` per side. Zero coefficients give flat
/// Beta(1, 1) priors.
pub fn link_prior_shapes(
    covariates: &CovariateMatrix,
    eta: &LinkCoefficients,
    person: usize,
) -> Result<[(f64, f64); 3]> {
    match eta {
        LinkCoefficients::BetaExp {
            recovery,
            outside,
            inside,
        } => {
            let z: Vec<f64> = covariates.row(person).to_vec();
            let shape = |pair: &[Vec<f64>; 2]| -> Result<(f64, f64)> {
                let dot = |e: &[f64]| z.iter().zip(e.iter()).map(|(a, b)| a * b).sum::<f64>();
                let (u, v) = (dot(&pair[0]), dot(&pair[1]));
                if u > 700.0 || v > 700.0 {
                    return Err(Error::numerical(
                        "link exponent overflow; rescale the covariates",
                    ));
                }
                // Keep the shapes strictly positive for the beta sampler.
                Ok((u.exp().max(1e-10), v.exp().max(1e-10)))
            };
            Ok([shape(recovery)?, shape(outside)?, shape(inside)?])
        }
        LinkCoefficients::Sigmoid { .. } => Err(Error::domain(
            "conjugate parameter sampling needs beta-exponential coefficients",
        )),
    }
}

/// How the sampler treats the infection parameters each sweep.
#[derive(Debug, Clone)]
pub enum ParamUpdate {
    /// Frozen at the given values; π and θ are frozen too.
    Fixed(InfectionParams),
    /// Recovery/outside/inside rates pinned per person (deterministic
    /// link), while π and θ keep their conjugate draws.
    FixedRates {
        gamma: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        hyper: BetaHyperParams,
    },
    /// Pooled scalar rates with the given priors, plus π and θ draws.
    Homogeneous(BetaHyperParams),
    /// Per-person rates with exponential-link beta priors, plus π and θ
    /// draws with the given hyperparameters.
    Heterogeneous {
        eta: LinkCoefficients,
        hyper: BetaHyperParams,
    },
}

/// Sampler configuration.
#[derive(Debug, Clone)]
pub struct GibbsConfig {
    pub iterations: usize,
    /// Sweeps discarded before averaging; defaults to half the total.
    pub burn_in: Option<usize>,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    pub beta_interp: BetaInterpretation,
    pub aux_mode: AuxSourceMode,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 500,
            burn_in: None,
            thin: 1,
            beta_interp: BetaInterpretation::Receive,
            aux_mode: AuxSourceMode::DropBoth,
            seed: 0,
        }
    }
}

/// A single-chain sampler owning its state; sweeps are strictly
/// sequential and deterministic in the seed.
pub struct GibbsSampler<'a> {
    network: &'a DynamicNetwork,
    symptoms: &'a SymptomTensor,
    covariates: Option<&'a CovariateMatrix>,
    update: ParamUpdate,
    beta_interp: BetaInterpretation,
    aux_mode: AuxSourceMode,
    rng: ChaCha8Rng,
    states: StateMatrix,
    aux: AuxSourceMatrix,
    params: InfectionParams,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        network: &'a DynamicNetwork,
        symptoms: &'a SymptomTensor,
        covariates: Option<&'a CovariateMatrix>,
        update: ParamUpdate,
        config: &GibbsConfig,
    ) -> Result<Self> {
        let n = network.n_people();
        let t_days = network.n_days();
        if symptoms.n_people() != n || symptoms.n_days() != t_days {
            return Err(Error::domain("symptom tensor shape mismatch"));
        }
        let s_count = symptoms.n_symptoms();
        let params = match &update {
            ParamUpdate::Fixed(p) => {
                if p.n_people() != n || p.n_symptoms() != s_count {
                    return Err(Error::domain("fixed parameter shape mismatch"));
                }
                p.clone()
            }
            ParamUpdate::FixedRates {
                gamma,
                alpha,
                beta,
                hyper,
            } => {
                hyper.validate()?;
                if gamma.len() != n || alpha.len() != n || beta.len() != n {
                    return Err(Error::domain("fixed rate vectors must match the person count"));
                }
                InfectionParams::new(
                    gamma.clone(),
                    alpha.clone(),
                    beta.clone(),
                    hyper.pi.0 / (hyper.pi.0 + hyper.pi.1),
                    Array2::from_elem((2, s_count), 0.5),
                )?
            }
            ParamUpdate::Homogeneous(hyper) => {
                hyper.validate()?;
                // Prior means as a starting point; overwritten by the first
                // parameter sweep.
                let mean = |(a, b): (f64, f64)| a / (a + b);
                InfectionParams::homogeneous(
                    n,
                    mean(hyper.gamma),
                    mean(hyper.alpha),
                    mean(hyper.beta),
                    mean(hyper.pi),
                    Array2::from_elem((2, s_count), 0.5),
                )?
            }
            ParamUpdate::Heterogeneous { eta, hyper } => {
                hyper.validate()?;
                let z = covariates
                    .ok_or_else(|| Error::domain("heterogeneous sampling needs covariates"))?;
                eta.validate(z.dim())?;
                InfectionParams::homogeneous(
                    n,
                    0.5,
                    0.5,
                    0.5,
                    0.5,
                    Array2::from_elem((2, s_count), 0.5),
                )?
            }
        };
        Ok(GibbsSampler {
            network,
            symptoms,
            covariates,
            update,
            beta_interp: config.beta_interp,
            aux_mode: config.aux_mode,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            states: StateMatrix::zeros(n, t_days),
            aux: AuxSourceMatrix::empty(n, t_days),
            params,
        })
    }

    pub fn states(&self) -> &StateMatrix {
        &self.states
    }

    pub fn aux(&self) -> &AuxSourceMatrix {
        &self.aux
    }

    pub fn params(&self) -> &InfectionParams {
        &self.params
    }

    pub fn counts(&self) -> Result<CountStatistics> {
        count_statistics(&self.states, &self.aux, self.network, self.beta_interp)
    }

    /// Swap the parameter update rule (used between EM iterations);
    /// the chain state is kept warm.
    pub fn set_param_update(&mut self, update: ParamUpdate) -> Result<()> {
        let n = self.network.n_people();
        match &update {
            ParamUpdate::Fixed(p) => {
                if p.n_people() != n {
                    return Err(Error::domain("fixed parameter shape mismatch"));
                }
                self.params = p.clone();
            }
            ParamUpdate::FixedRates {
                gamma,
                alpha,
                beta,
                ..
            } => {
                if gamma.len() != n || alpha.len() != n || beta.len() != n {
                    return Err(Error::domain("fixed rate vectors must match the person count"));
                }
                self.params.gamma.clone_from(gamma);
                self.params.alpha.clone_from(alpha);
                self.params.beta.clone_from(beta);
            }
            _ => {}
        }
        self.update = update;
        Ok(())
    }

    /// One systematic sweep: parameters, then states in a (day, person)
    /// raster, then source labels.
    pub fn sweep(&mut self) -> Result<()> {
        self.sweep_params()?;
        self.sweep_states()?;
        self.sweep_aux()?;
        Ok(())
    }

    fn sweep_params(&mut self) -> Result<()> {
        enum RateRule {
            Pinned,
            Pooled,
            PerPerson(LinkCoefficients),
        }
        let (hyper, rule) = match &self.update {
            ParamUpdate::Fixed(_) => return Ok(()),
            ParamUpdate::FixedRates {
                gamma,
                alpha,
                beta,
                hyper,
            } => {
                self.params.gamma.clone_from(gamma);
                self.params.alpha.clone_from(alpha);
                self.params.beta.clone_from(beta);
                (*hyper, RateRule::Pinned)
            }
            ParamUpdate::Homogeneous(h) => (*h, RateRule::Pooled),
            ParamUpdate::Heterogeneous { eta, hyper } => (*hyper, RateRule::PerPerson(eta.clone())),
        };

        match rule {
            RateRule::Pinned => {}
            RateRule::PerPerson(eta) => {
                let counts = self.counts()?;
                let z = self.covariates.expect("checked in constructor");
                for person in 0..self.network.n_people() {
                    let shapes = link_prior_shapes(z, &eta, person)?;
                    let post = infection_param_posterior(
                        &counts.per_person[person],
                        self.beta_interp,
                        shapes[0],
                        shapes[1],
                        shapes[2],
                    );
                    self.params.gamma[person] = draw_beta(&mut self.rng, post[0])?;
                    self.params.alpha[person] = draw_beta(&mut self.rng, post[1])?;
                    self.params.beta[person] = draw_beta(&mut self.rng, post[2])?;
                }
            }
            RateRule::Pooled => {
                let counts = self.counts()?;
                let pooled = counts.pooled();
                let post = infection_param_posterior(
                    &pooled,
                    self.beta_interp,
                    hyper.gamma,
                    hyper.alpha,
                    hyper.beta,
                );
                let gamma = draw_beta(&mut self.rng, post[0])?;
                let alpha = draw_beta(&mut self.rng, post[1])?;
                let beta = draw_beta(&mut self.rng, post[2])?;
                for person in 0..self.network.n_people() {
                    self.params.gamma[person] = gamma;
                    self.params.alpha[person] = alpha;
                    self.params.beta[person] = beta;
                }
            }
        }

        self.params.pi = sample_initial_rate(&self.states, &hyper, &mut self.rng)?;
        let (theta, _imputed) =
            sample_emissions_and_impute(&self.states, self.symptoms, &hyper, &mut self.rng)?;
        self.params.theta = theta;
        Ok(())
    }

    fn sweep_states(&mut self) -> Result<()> {
        for day in 0..=self.network.n_days() {
            for person in 0..self.network.n_people() {
                let p1 = hidden_state_probability(
                    &self.states,
                    self.symptoms,
                    &self.params,
                    self.network,
                    person,
                    day,
                    self.beta_interp,
                );
                let value = u8::from(self.rng.random::<f64>() < p1);
                self.states.set(person, day, value);
            }
        }
        Ok(())
    }

    fn sweep_aux(&mut self) -> Result<()> {
        self.aux = sample_aux_source(
            &self.states,
            &self.params,
            self.network,
            self.beta_interp,
            self.aux_mode,
            &mut self.rng,
        );
        Ok(())
    }
}

/// Full conditional P(x[person][day] = 1 | everything else): the incoming
/// transition (or initial rate at day 0), the day's observed emissions,
/// the person's own outgoing transition, and the outgoing transitions of
/// every contact whose exposure count the flip would change.
pub fn hidden_state_probability(
    states: &StateMatrix,
    symptoms: &SymptomTensor,
    params: &InfectionParams,
    network: &DynamicNetwork,
    person: usize,
    day: usize,
    beta_interp: BetaInterpretation,
) -> f64 {
    let t_days = states.n_days();
    let mut w = [1.0f64, 1.0];

    // Incoming factor.
    if day == 0 {
        w[0] *= 1.0 - params.pi;
        w[1] *= params.pi;
    } else {
        let prev = states.get(person, day - 1);
        if prev == 1 {
            w[0] *= params.gamma[person];
            w[1] *= 1.0 - params.gamma[person];
        } else {
            let infect = incoming_infection_probability(
                states,
                params,
                network,
                person,
                day,
                beta_interp,
            );
            w[0] *= 1.0 - infect;
            w[1] *= infect;
        }
    }

    // Emissions (day 0 has none); missing cells contribute a constant.
    if day >= 1 {
        for s in 0..symptoms.n_symptoms() {
            if let Some(y) = symptoms.get(person, day, s) {
                for (state, weight) in w.iter_mut().enumerate() {
                    let th = params.theta[(state, s)];
                    *weight *= if y == 1 { th } else { 1.0 - th };
                }
            }
        }
    }

    if day < t_days {
        // Own outgoing factor: the exposure count of the next transition
        // does not involve the person's own state.
        let next = states.get(person, day + 1);
        let infect = incoming_infection_probability(
            states,
            params,
            network,
            person,
            day + 1,
            beta_interp,
        );
        let from = |v: usize| -> f64 {
            if v == 1 {
                if next == 0 {
                    params.gamma[person]
                } else {
                    1.0 - params.gamma[person]
                }
            } else if next == 1 {
                infect
            } else {
                1.0 - infect
            }
        };
        w[0] *= from(0);
        w[1] *= from(1);

        // Contacts in tomorrow's snapshot whose exposure includes this
        // person's state today.
        for &m in network.neighbors(day + 1, person) {
            if states.get(m, day) != 0 {
                continue; // recovery case, exposure-independent
            }
            let went_infected = states.get(m, day + 1) == 1;
            for (v, weight) in w.iter_mut().enumerate() {
                let infect = match beta_interp {
                    BetaInterpretation::Receive => {
                        let mut c = 0usize;
                        for &q in network.neighbors(day + 1, m) {
                            let state = if q == person { v as u8 } else { states.get(q, day) };
                            c += usize::from(state == 1);
                        }
                        infection_probability(params.alpha[m], params.beta[m], c)
                    }
                    BetaInterpretation::Transmit => {
                        let mut betas = Vec::new();
                        for &q in network.neighbors(day + 1, m) {
                            let state = if q == person { v as u8 } else { states.get(q, day) };
                            if state == 1 {
                                betas.push(params.beta[q]);
                            }
                        }
                        infection_probability_transmit(params.alpha[m], &betas)
                    }
                };
                *weight *= if went_infected { infect } else { 1.0 - infect };
            }
        }
    }

    let total = w[0] + w[1];
    if !(total > 0.0) || !total.is_finite() {
        // Contradictory deterministic evidence: keep the current state.
        return f64::from(states.get(person, day));
    }
    w[1] / total
}

/// Infection probability of the transition into `day` for a currently
/// susceptible person, from the day-(day−1) states.
fn incoming_infection_probability(
    states: &StateMatrix,
    params: &InfectionParams,
    network: &DynamicNetwork,
    person: usize,
    day: usize,
    beta_interp: BetaInterpretation,
) -> f64 {
    match beta_interp {
        BetaInterpretation::Receive => {
            let c = exposure_count(states, network, person, day);
            infection_probability(params.alpha[person], params.beta[person], c)
        }
        BetaInterpretation::Transmit => {
            let betas: Vec<f64> = exposure_sources(states, network, person, day)
                .into_iter()
                .map(|m| params.beta[m])
                .collect();
            infection_probability_transmit(params.alpha[person], &betas)
        }
    }
}

/// Draw a full set of source labels for the current states.
pub fn sample_aux_source<R: Rng>(
    states: &StateMatrix,
    params: &InfectionParams,
    network: &DynamicNetwork,
    beta_interp: BetaInterpretation,
    aux_mode: AuxSourceMode,
    rng: &mut R,
) -> AuxSourceMatrix {
    let n = states.n_people();
    let t_days = states.n_days();
    let mut aux = AuxSourceMatrix::empty(n, t_days);
    for person in 0..n {
        for t in 0..t_days {
            if !(states.get(person, t) == 0 && states.get(person, t + 1) == 1) {
                continue;
            }
            let label = match beta_interp {
                BetaInterpretation::Receive => {
                    let c = exposure_count(states, network, person, t + 1);
                    let p = source_probabilities(
                        params.alpha[person],
                        params.beta[person],
                        c,
                        aux_mode,
                    );
                    let u = rng.random::<f64>();
                    if u < p[0] {
                        SourceLabel::Outside
                    } else if u < p[0] + p[1] {
                        SourceLabel::Inside
                    } else {
                        SourceLabel::Both
                    }
                }
                BetaInterpretation::Transmit => {
                    let sources = exposure_sources(states, network, person, t + 1);
                    let betas: Vec<f64> = sources.iter().map(|&m| params.beta[m]).collect();
                    let p = source_probabilities_transmit(params.alpha[person], &betas);
                    let u = rng.random::<f64>();
                    let mut acc = 0.0;
                    let mut chosen = SourceLabel::Outside;
                    for (i, &pi) in p.iter().enumerate() {
                        acc += pi;
                        if u < acc {
                            chosen = if i == 0 {
                                SourceLabel::Outside
                            } else {
                                SourceLabel::Neighbor(sources[i - 1])
                            };
                            break;
                        }
                    }
                    chosen
                }
            };
            aux.set(person, t, Some(label));
        }
    }
    aux
}

/// Beta posterior of the initial infection rate given the day-0 column.
pub fn initial_rate_posterior(states: &StateMatrix, hyper: &BetaHyperParams) -> (f64, f64) {
    let infected = (0..states.n_people())
        .filter(|&p| states.get(p, 0) == 1)
        .count();
    (
        hyper.pi.0 + infected as f64,
        hyper.pi.1 + (states.n_people() - infected) as f64,
    )
}

/// Draw the initial infection rate from its full conditional.
pub fn sample_initial_rate<R: Rng>(
    states: &StateMatrix,
    hyper: &BetaHyperParams,
    rng: &mut R,
) -> Result<f64> {
    draw_beta(rng, initial_rate_posterior(states, hyper))
}

/// Beta posterior parameters of each emission cell, counting observed
/// observations only.
pub fn emission_posteriors(
    states: &StateMatrix,
    symptoms: &SymptomTensor,
    hyper: &BetaHyperParams,
) -> Array2<(f64, f64)> {
    let s_count = symptoms.n_symptoms();
    let mut post = Array2::from_elem((2, s_count), (0.0, 0.0));
    for state in 0..2 {
        let prior = if state == 0 { hyper.theta0 } else { hyper.theta1 };
        for s in 0..s_count {
            post[(state, s)] = prior;
        }
    }
    for (person, day, s, y) in symptoms.observed_cells() {
        let state = states.get(person, day) as usize;
        let cell = &mut post[(state, s)];
        if y == 1 {
            cell.0 += 1.0;
        } else {
            cell.1 += 1.0;
        }
    }
    post
}

/// Draw the emission matrix from its full conditionals and impute the
/// missing cells for this sweep. Imputations are per-sweep draws for
/// reporting; they are not fed back into the conditionals.
pub fn sample_emissions_and_impute<R: Rng>(
    states: &StateMatrix,
    symptoms: &SymptomTensor,
    hyper: &BetaHyperParams,
    rng: &mut R,
) -> Result<(Array2<f64>, SymptomTensor)> {
    let post = emission_posteriors(states, symptoms, hyper);
    let s_count = symptoms.n_symptoms();
    let mut theta = Array2::zeros((2, s_count));
    for state in 0..2 {
        for s in 0..s_count {
            theta[(state, s)] = draw_beta(rng, post[(state, s)])?;
        }
    }
    let mut imputed = symptoms.clone();
    for person in 0..symptoms.n_people() {
        for day in 1..=symptoms.n_days() {
            for s in 0..s_count {
                if symptoms.get(person, day, s).is_none() {
                    let p = theta[(states.get(person, day) as usize, s)];
                    imputed.set(person, day, s, Some(u8::from(rng.random::<f64>() < p)));
                }
            }
        }
    }
    Ok((theta, imputed))
}

/// One scalar parameter draw per kept sweep (homogeneous runs), or the
/// per-person means (heterogeneous runs).
#[derive(Debug, Clone, serde::Serialize)]
pub struct ParamDraw {
    pub sweep: usize,
    pub pi: f64,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Posterior summary of a Gibbs run.
#[derive(Debug, Clone)]
pub struct GibbsTrace {
    /// Posterior mean of the hidden states over kept sweeps, N × (T+1).
    pub mean_infected: Array2<f64>,
    /// Posterior means of the per-person rates over kept sweeps.
    pub mean_gamma: Vec<f64>,
    pub mean_alpha: Vec<f64>,
    pub mean_beta: Vec<f64>,
    pub mean_pi: f64,
    pub mean_theta: Array2<f64>,
    /// Posterior mean of each missing observation (observed cells carry
    /// their observed value).
    pub mean_symptoms: ndarray::Array3<f64>,
    pub final_states: StateMatrix,
    pub final_aux: AuxSourceMatrix,
    /// Thinned post-burn-in parameter draws.
    pub param_draws: Vec<ParamDraw>,
    pub kept_sweeps: usize,
}

/// Run a full chain: systematic sweeps, burn-in discard, posterior means
/// over the kept draws.
pub fn run_gibbs(
    network: &DynamicNetwork,
    symptoms: &SymptomTensor,
    covariates: Option<&CovariateMatrix>,
    update: ParamUpdate,
    config: &GibbsConfig,
) -> Result<GibbsTrace> {
    if config.iterations < 2 {
        return Err(Error::domain("need at least two sweeps"));
    }
    if config.thin == 0 {
        return Err(Error::domain("thin must be at least 1"));
    }
    let burn_in = config.burn_in.unwrap_or(config.iterations / 2);
    if burn_in >= config.iterations {
        return Err(Error::domain("burn-in must leave at least one sweep"));
    }
    let mut sampler = GibbsSampler::new(network, symptoms, covariates, update, config)?;

    let n = network.n_people();
    let t_days = network.n_days();
    let s_count = symptoms.n_symptoms();
    let mut sum_states = Array2::<f64>::zeros((n, t_days + 1));
    let mut sum_gamma = vec![0.0; n];
    let mut sum_alpha = vec![0.0; n];
    let mut sum_beta = vec![0.0; n];
    let mut sum_pi = 0.0;
    let mut sum_theta = Array2::<f64>::zeros((2, s_count));
    let mut sum_symptoms = ndarray::Array3::<f64>::zeros((n, t_days, s_count));
    let mut param_draws = Vec::new();
    let mut kept = 0usize;

    for sweep_idx in 0..config.iterations {
        sampler.sweep()?;
        if sweep_idx < burn_in || (sweep_idx - burn_in) % config.thin != 0 {
            continue;
        }
        kept += 1;
        for person in 0..n {
            for day in 0..=t_days {
                sum_states[(person, day)] += f64::from(sampler.states.get(person, day));
            }
        }
        for person in 0..n {
            sum_gamma[person] += sampler.params.gamma[person];
            sum_alpha[person] += sampler.params.alpha[person];
            sum_beta[person] += sampler.params.beta[person];
        }
        sum_pi += sampler.params.pi;
        sum_theta += &sampler.params.theta;
        // Per-sweep imputation of the missing cells, for reporting.
        for person in 0..n {
            for day in 1..=t_days {
                for s in 0..s_count {
                    let v = match symptoms.get(person, day, s) {
                        Some(v) => f64::from(v),
                        None => {
                            let p = sampler.params.theta
                                [(sampler.states.get(person, day) as usize, s)];
                            f64::from(sampler.rng.random::<f64>() < p)
                        }
                    };
                    sum_symptoms[(person, day - 1, s)] += v;
                }
            }
        }
        param_draws.push(ParamDraw {
            sweep: sweep_idx,
            pi: sampler.params.pi,
            gamma: sampler.params.gamma.clone(),
            alpha: sampler.params.alpha.clone(),
            beta: sampler.params.beta.clone(),
        });
    }

    let k = kept as f64;
    Ok(GibbsTrace {
        mean_infected: sum_states / k,
        mean_gamma: sum_gamma.iter().map(|v| v / k).collect(),
        mean_alpha: sum_alpha.iter().map(|v| v / k).collect(),
        mean_beta: sum_beta.iter().map(|v| v / k).collect(),
        mean_pi: sum_pi / k,
        mean_theta: sum_theta / k,
        mean_symptoms: sum_symptoms / k,
        final_states: sampler.states.clone(),
        final_aux: sampler.aux.clone(),
        param_draws,
        kept_sweeps: kept,
    })
}
