//! Shared test fixtures and independent oracles.
//!
//! Everything here recomputes quantities from first principles — joint
//! densities by direct products, marginals and MAP states by full
//! enumeration — and stays independent of the library's inference paths.

#![allow(dead_code)]

use gchmm::data::{CovariateMatrix, DynamicNetwork, StateMatrix, SymptomTensor};
use gchmm::sim::{
    simulate, BetaInterpretation, InfectionParams, LinkCoefficients, ParamSource, SimConfig,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Joint density of one complete assignment under the generative model:
/// initial Bernoulli terms, one transition factor per person/day pair and
/// the observed emissions (missing cells contribute nothing).
pub fn joint_density(
    states: &StateMatrix,
    symptoms: &SymptomTensor,
    params: &InfectionParams,
    network: &DynamicNetwork,
    beta_interp: BetaInterpretation,
) -> f64 {
    let n = states.n_people();
    let t_days = states.n_days();
    let mut p = 1.0;
    for person in 0..n {
        let x0 = states.get(person, 0);
        p *= if x0 == 1 { params.pi } else { 1.0 - params.pi };
        for day in 1..=t_days {
            let prev = states.get(person, day - 1);
            let cur = states.get(person, day);
            let trans = if prev == 1 {
                if cur == 0 {
                    params.gamma[person]
                } else {
                    1.0 - params.gamma[person]
                }
            } else {
                let infect = match beta_interp {
                    BetaInterpretation::Receive => {
                        let c = network
                            .neighbors(day, person)
                            .iter()
                            .filter(|&&m| states.get(m, day - 1) == 1)
                            .count();
                        1.0 - (1.0 - params.alpha[person])
                            * (1.0 - params.beta[person]).powi(c as i32)
                    }
                    BetaInterpretation::Transmit => {
                        let survive: f64 = network
                            .neighbors(day, person)
                            .iter()
                            .filter(|&&m| states.get(m, day - 1) == 1)
                            .map(|&m| 1.0 - params.beta[m])
                            .product();
                        1.0 - (1.0 - params.alpha[person]) * survive
                    }
                };
                if cur == 1 {
                    infect
                } else {
                    1.0 - infect
                }
            };
            p *= trans;
            for s in 0..symptoms.n_symptoms() {
                if let Some(y) = symptoms.get(person, day, s) {
                    let th = params.theta[(cur as usize, s)];
                    p *= if y == 1 { th } else { 1.0 - th };
                }
            }
        }
    }
    p
}

/// Write an assignment index into a state matrix: bit `person * (T+1) +
/// day` of `code` is the state of that cell.
fn decode_assignment(code: u64, n: usize, t_days: usize) -> StateMatrix {
    let mut states = StateMatrix::zeros(n, t_days);
    for person in 0..n {
        for day in 0..=t_days {
            let bit = person as u64 * (t_days as u64 + 1) + day as u64;
            states.set(person, day, ((code >> bit) & 1) as u8);
        }
    }
    states
}

/// Exact posterior marginals P(x = 1 | observations) by enumeration over
/// every assignment. Only viable for tiny instances.
pub fn enumerate_marginals(
    symptoms: &SymptomTensor,
    params: &InfectionParams,
    network: &DynamicNetwork,
    beta_interp: BetaInterpretation,
) -> Array2<f64> {
    let n = network.n_people();
    let t_days = network.n_days();
    let bits = n * (t_days + 1);
    assert!(bits <= 24, "enumeration over {bits} bits is unreasonable");
    let mut total = 0.0;
    let mut mass = Array2::<f64>::zeros((n, t_days + 1));
    for code in 0..(1u64 << bits) {
        let states = decode_assignment(code, n, t_days);
        let p = joint_density(&states, symptoms, params, network, beta_interp);
        total += p;
        for person in 0..n {
            for day in 0..=t_days {
                if states.get(person, day) == 1 {
                    mass[(person, day)] += p;
                }
            }
        }
    }
    mass / total
}

/// Exact joint maximizer by enumeration; the first maximizer in counting
/// order wins exact ties.
pub fn enumerate_map(
    symptoms: &SymptomTensor,
    params: &InfectionParams,
    network: &DynamicNetwork,
    beta_interp: BetaInterpretation,
) -> StateMatrix {
    let n = network.n_people();
    let t_days = network.n_days();
    let bits = n * (t_days + 1);
    assert!(bits <= 24);
    let mut best = (f64::NEG_INFINITY, 0u64);
    for code in 0..(1u64 << bits) {
        let states = decode_assignment(code, n, t_days);
        let p = joint_density(&states, symptoms, params, network, beta_interp);
        if p > best.0 {
            best = (p, code);
        }
    }
    decode_assignment(best.1, n, t_days)
}

/// Random loopy instance: a few people, a few days, random edges and a
/// random fully/partially observed symptom tensor.
pub struct SmallInstance {
    pub network: DynamicNetwork,
    pub symptoms: SymptomTensor,
    pub params: InfectionParams,
    pub states: StateMatrix,
}

pub fn random_small_instance(
    seed: u64,
    n: usize,
    t_days: usize,
    s_count: usize,
    edge_prob: f64,
    missing_prob: f64,
) -> SmallInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut days = Vec::new();
    for _ in 0..t_days {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(edge_prob) {
                    edges.push((i, j));
                }
            }
        }
        days.push(edges);
    }
    let network = DynamicNetwork::from_edge_lists(n, days).unwrap();

    let unit = |rng: &mut ChaCha8Rng| rng.random_range(0.1..0.9);
    let params = InfectionParams::new(
        (0..n).map(|_| unit(&mut rng)).collect(),
        (0..n).map(|_| unit(&mut rng)).collect(),
        (0..n).map(|_| unit(&mut rng)).collect(),
        unit(&mut rng),
        Array2::from_shape_fn((2, s_count), |_| unit(&mut rng)),
    )
    .unwrap();

    let mut states = StateMatrix::zeros(n, t_days);
    let mut symptoms = SymptomTensor::missing(n, t_days, s_count);
    for person in 0..n {
        for day in 0..=t_days {
            states.set(person, day, u8::from(rng.random_bool(0.5)));
        }
        for day in 1..=t_days {
            for s in 0..s_count {
                if !rng.random_bool(missing_prob) {
                    symptoms.set(person, day, s, Some(u8::from(rng.random_bool(0.5))));
                }
            }
        }
    }
    SmallInstance {
        network,
        symptoms,
        params,
        states,
    }
}

/// The semi-synthetic evaluation instance: a degree-capped scale-free
/// dynamic network at study scale, standardized covariates, and
/// sigmoid-linked ground-truth parameters.
pub struct SemiSynthetic {
    pub network: DynamicNetwork,
    pub covariates: CovariateMatrix,
    pub eta_true: LinkCoefficients,
    pub truth_states: StateMatrix,
    pub truth_params: InfectionParams,
    /// Fully observed symptom reports; mask separately when needed.
    pub symptoms: SymptomTensor,
}

pub const SEMI_PEOPLE: usize = 84;
pub const SEMI_DAYS: usize = 107;
pub const SEMI_SYMPTOMS: usize = 6;
pub const SEMI_MAX_DEGREE: usize = 11;

pub fn true_eta(k: usize) -> LinkCoefficients {
    assert_eq!(k, 4);
    LinkCoefficients::Sigmoid {
        recovery: vec![-0.9, 0.5, -0.4, 0.3],
        outside: vec![-3.2, 0.4, 0.3, -0.3],
        inside: vec![-1.6, -0.5, 0.4, 0.4],
    }
}

pub fn semi_synthetic(seed: u64) -> SemiSynthetic {
    let network = gchmm::data::synthetic_scale_free(
        SEMI_PEOPLE,
        SEMI_DAYS,
        SEMI_MAX_DEGREE,
        2,
        0.35,
        1000 + seed,
    );
    assert!(network.max_degree() <= SEMI_MAX_DEGREE);

    // Three roughly standardized features plus the intercept.
    let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
    let features: Vec<Vec<f64>> = (0..SEMI_PEOPLE)
        .map(|_| {
            (0..3)
                .map(|_| {
                    let u: f64 = rng.random_range(-1.0..1.0);
                    let v: f64 = rng.random_range(-1.0..1.0);
                    (u + v) * 0.9
                })
                .collect()
        })
        .collect();
    let covariates = CovariateMatrix::from_features(features).unwrap();

    let eta_true = true_eta(4);
    let theta = {
        let lows = [0.04, 0.06, 0.05, 0.08, 0.05, 0.06];
        let highs = [0.70, 0.80, 0.75, 0.65, 0.78, 0.72];
        Array2::from_shape_fn((2, SEMI_SYMPTOMS), |(state, s)| {
            if state == 0 {
                lows[s]
            } else {
                highs[s]
            }
        })
    };
    let sim = simulate(
        &network,
        Some(&covariates),
        &ParamSource::Link {
            eta: eta_true.clone(),
            pi: 0.15,
            theta,
        },
        &SimConfig {
            beta_interp: BetaInterpretation::Receive,
            p_miss: 0.0,
            seed: 3000 + seed,
        },
        SEMI_SYMPTOMS,
    )
    .unwrap();

    SemiSynthetic {
        network,
        covariates,
        eta_true,
        truth_states: sim.states,
        truth_params: sim.params,
        symptoms: sim.symptoms,
    }
}

/// Thresholded accuracy of posterior marginals against the truth.
pub fn posterior_accuracy(truth: &StateMatrix, p_infected: &Array2<f64>) -> f64 {
    let pred = gchmm::eval::classify(p_infected, 0.5).unwrap();
    truth.agreement(&pred)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
