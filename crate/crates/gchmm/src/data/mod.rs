//! Core data model: problem dimensions, contact networks, state and symptom
//! tensors, covariates, and the file loaders that build them.

mod covariates;
mod network;
mod states;

pub use covariates::{components_for_variance, load_covariates, pca_reduce, CovariateMatrix, PcaResult};
pub use network::{load_network, probe_contact_file, synthetic_scale_free, DynamicNetwork};
pub use states::{load_symptoms, probe_symptom_file, StateMatrix, SymptomTensor};

use crate::error::{Error, Result};

/// Problem dimensions shared by every module.
///
/// `n_people` (N), `n_days` (T), `n_symptoms` (S) and `n_covariates` (K)
/// come from the inputs; `max_degree` (M) is derived from the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemDims {
    pub n_people: usize,
    pub n_days: usize,
    pub n_symptoms: usize,
    pub n_covariates: usize,
    pub max_degree: usize,
}

impl ProblemDims {
    pub fn new(
        n_people: usize,
        n_days: usize,
        n_symptoms: usize,
        n_covariates: usize,
        max_degree: usize,
    ) -> Result<Self> {
        if n_people == 0 || n_days == 0 || n_symptoms == 0 || n_covariates == 0 {
            return Err(Error::domain("all dimensions must be strictly positive"));
        }
        if max_degree > n_people.saturating_sub(1) {
            return Err(Error::domain(format!(
                "max degree {max_degree} exceeds {} (people minus one)",
                n_people - 1
            )));
        }
        Ok(ProblemDims {
            n_people,
            n_days,
            n_symptoms,
            n_covariates,
            max_degree,
        })
    }
}

/// Beta prior hyperparameters for the homogeneous generative model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaHyperParams {
    pub pi: (f64, f64),
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
    pub theta0: (f64, f64),
    pub theta1: (f64, f64),
}

impl BetaHyperParams {
    /// Flat Beta(1, 1) priors everywhere.
    pub fn flat() -> Self {
        let one = (1.0, 1.0);
        BetaHyperParams {
            pi: one,
            alpha: one,
            beta: one,
            gamma: one,
            theta0: one,
            theta1: one,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (a, b) in [
            self.pi,
            self.alpha,
            self.beta,
            self.gamma,
            self.theta0,
            self.theta1,
        ] {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::domain("beta hyperparameters must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for BetaHyperParams {
    fn default() -> Self {
        Self::flat()
    }
}

/// Infected graph-neighbors of `person` in the day-`day` snapshot, read
/// against the states of the same day: everyone adjacent to `person` in
/// `G_day` whose state column `day` is 1, plus their count.
pub fn infectious_sources(
    states: &StateMatrix,
    network: &DynamicNetwork,
    person: usize,
    day: usize,
) -> Result<(Vec<usize>, usize)> {
    if person >= states.n_people() {
        return Err(Error::domain(format!("person index {person} out of range")));
    }
    if day == 0 || day > network.n_days() || day > states.n_days() {
        return Err(Error::domain(format!("day {day} out of range")));
    }
    let sources: Vec<usize> = network
        .neighbors(day, person)
        .iter()
        .copied()
        .filter(|&m| states.get(m, day) == 1)
        .collect();
    let count = sources.len();
    Ok((sources, count))
}

/// Infected neighbors driving the transition into day `day`: neighbors of
/// `person` in `G_day` whose state at `day − 1` is 1. This is the exposure
/// set conditioning `x[·][day]` on `x[·][day−1]`.
pub fn exposure_sources(
    states: &StateMatrix,
    network: &DynamicNetwork,
    person: usize,
    day: usize,
) -> Vec<usize> {
    debug_assert!(day >= 1 && day <= network.n_days());
    network
        .neighbors(day, person)
        .iter()
        .copied()
        .filter(|&m| states.get(m, day - 1) == 1)
        .collect()
}

/// Count form of [`exposure_sources`].
pub fn exposure_count(
    states: &StateMatrix,
    network: &DynamicNetwork,
    person: usize,
    day: usize,
) -> usize {
    debug_assert!(day >= 1 && day <= network.n_days());
    network
        .neighbors(day, person)
        .iter()
        .filter(|&&m| states.get(m, day - 1) == 1)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_validation() {
        assert!(ProblemDims::new(3, 2, 1, 1, 2).is_ok());
        assert!(ProblemDims::new(0, 2, 1, 1, 0).is_err());
        assert!(ProblemDims::new(3, 2, 1, 1, 3).is_err());
    }

    #[test]
    fn infectious_sources_single_infected_neighbor() {
        // E_1 = {(0, 2)}, person 2 infected at day 1.
        let network = DynamicNetwork::from_edge_lists(4, vec![vec![(0, 2)]]).unwrap();
        let mut states = StateMatrix::zeros(4, 1);
        states.set(2, 1, 1);
        let (sources, count) = infectious_sources(&states, &network, 0, 1).unwrap();
        assert_eq!(sources, vec![2]);
        assert_eq!(count, 1);
    }

    #[test]
    fn infectious_sources_filters_susceptible_neighbors() {
        // E_1 = {(0, 2), (0, 3)}, only person 2 infected.
        let network = DynamicNetwork::from_edge_lists(4, vec![vec![(0, 2), (0, 3)]]).unwrap();
        let mut states = StateMatrix::zeros(4, 1);
        states.set(2, 1, 1);
        let (sources, count) = infectious_sources(&states, &network, 0, 1).unwrap();
        assert_eq!(sources, vec![2]);
        assert_eq!(count, 1);
    }

    #[test]
    fn infectious_sources_isolated_node() {
        let network = DynamicNetwork::from_edge_lists(4, vec![vec![]]).unwrap();
        let states = StateMatrix::zeros(4, 1);
        let (sources, count) = infectious_sources(&states, &network, 1, 1).unwrap();
        assert!(sources.is_empty());
        assert_eq!(count, 0);
    }

    #[test]
    fn infectious_sources_bad_index() {
        let network = DynamicNetwork::from_edge_lists(2, vec![vec![]]).unwrap();
        let states = StateMatrix::zeros(2, 1);
        assert!(infectious_sources(&states, &network, 5, 1).is_err());
        assert!(infectious_sources(&states, &network, 0, 2).is_err());
    }

    #[test]
    fn sources_match_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(2..=10usize);
            let t = rng.random_range(1..=10usize);
            let mut days = Vec::new();
            for _ in 0..t {
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.random_bool(0.3) {
                            edges.push((i, j));
                        }
                    }
                }
                days.push(edges);
            }
            let network = DynamicNetwork::from_edge_lists(n, days.clone()).unwrap();
            let mut states = StateMatrix::zeros(n, t);
            for p in 0..n {
                for d in 0..=t {
                    states.set(p, d, u8::from(rng.random_bool(0.5)));
                }
            }
            for p in 0..n {
                for d in 1..=t {
                    let (sources, count) = infectious_sources(&states, &network, p, d).unwrap();
                    let mut expect: Vec<usize> = days[d - 1]
                        .iter()
                        .filter_map(|&(i, j)| {
                            if i == p {
                                Some(j)
                            } else if j == p {
                                Some(i)
                            } else {
                                None
                            }
                        })
                        .filter(|&m| states.get(m, d) == 1)
                        .collect();
                    expect.sort_unstable();
                    expect.dedup();
                    assert_eq!(sources, expect);
                    assert_eq!(count, expect.len());
                }
            }
        }
    }
}
