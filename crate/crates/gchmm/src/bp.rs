//! Single-node belief propagation on the unrolled factor graph.
//!
//! Variables are the per-person, per-day infection states. Each day-`t`
//! state has one incoming transition factor whose parents are the person's
//! own day-`t−1` state plus the day-`t−1` states of their contacts in
//! `G_t`, and one emission factor per symptom. Sum-product sweeps give
//! approximate marginals (exact on coupling-free instances); max-product
//! sweeps give a joint decode.
//!
//! The update schedule is synchronous: every sweep recomputes all messages
//! from the previous sweep's values, so results do not depend on any
//! intra-sweep ordering and factors can be processed in parallel.
//!
//! The factor tables never have to be enumerated over all parent
//! configurations: the transition probability depends on the neighbors
//! only through their infected count, so neighbor messages are folded with
//! a count-indexed dynamic program instead of a 2^degree sum.

use ndarray::Array2;

use crate::data::{DynamicNetwork, StateMatrix, SymptomTensor};
use crate::error::{Error, Result};
use crate::exec::map_collect;
use crate::sim::{infection_probability, InfectionParams};

/// Messages smaller than this are rebuilt from explicit products instead
/// of divided out of the belief.
const DIVISION_GUARD: f64 = 1e-300;

/// Factor graph over the unrolled model: structure and parameters only,
/// evidence enters through [`init_messages`].
#[derive(Debug, Clone)]
pub struct FactorGraph {
    n_people: usize,
    t_days: usize,
    n_symptoms: usize,
    params: InfectionParams,
    /// `parents[f]`: variable ids, slot 0 = own previous state, then the
    /// day's contacts in sorted order.
    parents: Vec<Vec<usize>>,
    /// `child[f]`: the variable the factor conditions.
    child: Vec<usize>,
    /// Incoming transition factor of each variable (`None` at day 0).
    in_factor: Vec<Option<usize>>,
    /// Factors each variable feeds as a parent, with the parent slot.
    out_factors: Vec<Vec<(usize, usize)>>,
}

impl FactorGraph {
    #[inline]
    pub fn variable_id(&self, person: usize, day: usize) -> usize {
        person * (self.t_days + 1) + day
    }

    #[inline]
    fn factor_id(&self, person: usize, day: usize) -> usize {
        person * self.t_days + (day - 1)
    }

    /// (person, day) of a transition factor; the factor conditions the
    /// day-`day` state.
    #[inline]
    pub fn factor_person_day(&self, fid: usize) -> (usize, usize) {
        (fid / self.t_days, fid % self.t_days + 1)
    }

    pub fn n_people(&self) -> usize {
        self.n_people
    }

    pub fn n_days(&self) -> usize {
        self.t_days
    }

    pub fn n_transition_factors(&self) -> usize {
        self.parents.len()
    }

    /// One emission factor per (person, day, symptom), missing or not.
    pub fn n_emission_factors(&self) -> usize {
        self.n_people * self.t_days * self.n_symptoms
    }

    /// Parent variables of the transition factor for (person, day).
    pub fn factor_parents(&self, person: usize, day: usize) -> &[usize] {
        &self.parents[self.factor_id(person, day)]
    }

    pub fn params(&self) -> &InfectionParams {
        &self.params
    }
}

/// Build the factor graph for a network and parameter set.
pub fn build_factor_graph(
    network: &DynamicNetwork,
    params: &InfectionParams,
    n_symptoms: usize,
) -> Result<FactorGraph> {
    let n = network.n_people();
    let t_days = network.n_days();
    if params.n_people() != n {
        return Err(Error::domain("parameter rows must match the person count"));
    }
    let n_vars = n * (t_days + 1);
    let n_factors = n * t_days;
    let mut graph = FactorGraph {
        n_people: n,
        t_days,
        n_symptoms,
        params: params.clone(),
        parents: Vec::with_capacity(n_factors),
        child: Vec::with_capacity(n_factors),
        in_factor: vec![None; n_vars],
        out_factors: vec![Vec::new(); n_vars],
    };
    for person in 0..n {
        for day in 1..=t_days {
            let fid = graph.parents.len();
            let mut ps = Vec::with_capacity(1 + network.degree(day, person));
            ps.push(graph.variable_id(person, day - 1));
            for &m in network.neighbors(day, person) {
                ps.push(graph.variable_id(m, day - 1));
            }
            for (slot, &p) in ps.iter().enumerate() {
                graph.out_factors[p].push((fid, slot));
            }
            let child = graph.variable_id(person, day);
            graph.in_factor[child] = Some(fid);
            graph.parents.push(ps);
            graph.child.push(child);
        }
    }
    Ok(graph)
}

/// Length-2 message tables for every factor/parent pair, in both
/// directions, plus the per-variable emission products.
#[derive(Debug, Clone)]
pub struct MessageStore {
    /// `pi[f][slot]`: child-directed message from the slot's parent
    /// variable into factor `f`.
    pi: Vec<Vec<[f64; 2]>>,
    /// `lambda[f][slot]`: parent-directed message from factor `f`'s child
    /// back to the slot's parent variable.
    lambda: Vec<Vec<[f64; 2]>>,
    /// Per-variable product of emission messages (all ones at day 0 and
    /// for missing observations).
    emission: Vec<[f64; 2]>,
}

impl MessageStore {
    pub fn pi_message(&self, fid: usize, slot: usize) -> [f64; 2] {
        self.pi[fid][slot]
    }

    pub fn lambda_message(&self, fid: usize, slot: usize) -> [f64; 2] {
        self.lambda[fid][slot]
    }

    pub fn emission_product(&self, vid: usize) -> [f64; 2] {
        self.emission[vid]
    }
}

/// Indicator table of an observed symptom variable.
pub fn evidence_indicator(y: u8) -> [f64; 2] {
    [f64::from(y == 0), f64::from(y == 1)]
}

/// Message an emission factor sends to its state variable: the factor row
/// selected by the observed value, or all-ones when the observation is
/// missing.
pub fn emission_message(theta: &Array2<f64>, symptom: usize, y: Option<u8>) -> [f64; 2] {
    match y {
        Some(1) => [theta[(0, symptom)], theta[(1, symptom)]],
        Some(_) => [1.0 - theta[(0, symptom)], 1.0 - theta[(1, symptom)]],
        None => [1.0, 1.0],
    }
}

/// Fresh message store: every variable-to-factor and factor-to-variable
/// table starts as all ones; emission products are folded in from the
/// observations.
pub fn init_messages(graph: &FactorGraph, symptoms: &SymptomTensor) -> MessageStore {
    let ones = [1.0, 1.0];
    let pi: Vec<Vec<[f64; 2]>> = graph.parents.iter().map(|ps| vec![ones; ps.len()]).collect();
    let lambda = pi.clone();
    let n_vars = graph.n_people * (graph.t_days + 1);
    let mut emission = vec![ones; n_vars];
    for person in 0..graph.n_people {
        for day in 1..=graph.t_days {
            let mut e = ones;
            for s in 0..graph.n_symptoms {
                let m = emission_message(&graph.params.theta, s, symptoms.get(person, day, s));
                e[0] *= m[0];
                e[1] *= m[1];
            }
            emission[graph.variable_id(person, day)] = e;
        }
    }
    MessageStore {
        pi,
        lambda,
        emission,
    }
}

fn normalize(mut t: [f64; 2]) -> Result<[f64; 2]> {
    let sum = t[0] + t[1];
    if !sum.is_finite() || sum <= 0.0 {
        return Err(Error::numerical(format!("unnormalizable message table {t:?}")));
    }
    t[0] /= sum;
    t[1] /= sum;
    Ok(t)
}

/// Fold neighbor messages into an (unnormalized) weight per infected
/// count. `skip` leaves one slot out, for messages directed at that slot.
fn count_dp(neighbor_msgs: &[[f64; 2]], skip: Option<usize>, max_product: bool) -> Vec<f64> {
    let mut dp: Vec<f64> = vec![1.0];
    for (q, m) in neighbor_msgs.iter().enumerate() {
        if skip == Some(q) {
            continue;
        }
        let mut next: Vec<f64> = vec![0.0; dp.len() + 1];
        for (c, &w) in dp.iter().enumerate() {
            if max_product {
                next[c] = next[c].max(w * m[0]);
                next[c + 1] = next[c + 1].max(w * m[1]);
            } else {
                next[c] += w * m[0];
                next[c + 1] += w * m[1];
            }
        }
        dp = next;
    }
    dp
}

#[inline]
fn fold(acc: f64, v: f64, max_product: bool) -> f64 {
    if max_product {
        acc.max(v)
    } else {
        acc + v
    }
}

/// One variable's aggregate quantities for a sweep.
struct VariableArrays {
    /// Factor-to-child (forward) value per variable.
    pi_val: Vec<[f64; 2]>,
    /// Emission × factor-to-parent products (backward value) per variable.
    lambda_val: Vec<[f64; 2]>,
    /// Normalized beliefs per variable.
    beliefs: Vec<[f64; 2]>,
}

/// Forward value of one variable: the prior at day 0, otherwise the
/// incoming factor marginalized over its parents' current messages.
pub fn pi_value(
    store: &MessageStore,
    graph: &FactorGraph,
    person: usize,
    day: usize,
    max_product: bool,
) -> Result<[f64; 2]> {
    if day == 0 {
        return Ok([1.0 - graph.params.pi, graph.params.pi]);
    }
    let fid = graph.factor_id(person, day);
    let own = store.pi[fid][0];
    let nbrs = &store.pi[fid][1..];
    let w = count_dp(nbrs, None, max_product);
    let mass = w.iter().fold(0.0, |a, &v| fold(a, v, max_product));
    let gamma = graph.params.gamma[person];
    let alpha = graph.params.alpha[person];
    let beta = graph.params.beta[person];
    let mut val = [0.0; 2];
    for (child_state, slot) in val.iter_mut().enumerate() {
        let from_one = own[1] * mass * if child_state == 0 { gamma } else { 1.0 - gamma };
        let mut from_zero = 0.0;
        for (c, &wc) in w.iter().enumerate() {
            let infect = infection_probability(alpha, beta, c);
            let phi = if child_state == 1 { infect } else { 1.0 - infect };
            from_zero = fold(from_zero, wc * phi, max_product);
        }
        *slot = fold(from_one, own[0] * from_zero, max_product);
    }
    Ok(val)
}

/// Backward value of one variable: its emission product times every
/// message arriving from the next day's factors.
pub fn lambda_value(store: &MessageStore, graph: &FactorGraph, person: usize, day: usize) -> [f64; 2] {
    let vid = graph.variable_id(person, day);
    let mut val = store.emission[vid];
    for &(fid, slot) in &graph.out_factors[vid] {
        let m = store.lambda[fid][slot];
        val[0] *= m[0];
        val[1] *= m[1];
    }
    val
}

fn variable_arrays(
    store: &MessageStore,
    graph: &FactorGraph,
    max_product: bool,
) -> Result<VariableArrays> {
    let n_vars = graph.n_people * (graph.t_days + 1);
    let per_var: Vec<Result<([f64; 2], [f64; 2], [f64; 2])>> = map_collect(n_vars, |vid| {
        let person = vid / (graph.t_days + 1);
        let day = vid % (graph.t_days + 1);
        let pv = pi_value(store, graph, person, day, max_product)?;
        let lv = lambda_value(store, graph, person, day);
        let bel = normalize([pv[0] * lv[0], pv[1] * lv[1]]).map_err(|_| {
            Error::numerical(format!(
                "belief for person {person} day {day} is not normalizable"
            ))
        })?;
        Ok((pv, lv, bel))
    });
    let mut arrays = VariableArrays {
        pi_val: Vec::with_capacity(n_vars),
        lambda_val: Vec::with_capacity(n_vars),
        beliefs: Vec::with_capacity(n_vars),
    };
    for item in per_var {
        let (pv, lv, bel) = item?;
        arrays.pi_val.push(pv);
        arrays.lambda_val.push(lv);
        arrays.beliefs.push(bel);
    }
    Ok(arrays)
}

/// Recompute the parent-directed messages of the transition factor into
/// (person, day), from the current store. Returns one normalized table
/// per parent slot; the store is not modified.
pub fn update_lambda(
    store: &MessageStore,
    graph: &FactorGraph,
    person: usize,
    day: usize,
) -> Result<Vec<[f64; 2]>> {
    let child_lambda = lambda_value(store, graph, person, day);
    factor_lambda_updates(store, graph, graph.factor_id(person, day), child_lambda, false)
}

fn factor_lambda_updates(
    store: &MessageStore,
    graph: &FactorGraph,
    fid: usize,
    child_lambda: [f64; 2],
    max_product: bool,
) -> Result<Vec<[f64; 2]>> {
    let (person, _) = graph.factor_person_day(fid);
    let gamma = graph.params.gamma[person];
    let alpha = graph.params.alpha[person];
    let beta = graph.params.beta[person];
    // Recovery cases do not depend on the exposure count.
    let from_infected = fold(
        child_lambda[0] * gamma,
        child_lambda[1] * (1.0 - gamma),
        max_product,
    );
    let child_given_count = |c: usize| -> f64 {
        let infect = infection_probability(alpha, beta, c);
        fold(
            child_lambda[0] * (1.0 - infect),
            child_lambda[1] * infect,
            max_product,
        )
    };

    let own = store.pi[fid][0];
    let nbrs = &store.pi[fid][1..];
    let n_slots = graph.parents[fid].len();
    let mut out = Vec::with_capacity(n_slots);

    // Slot 0: the person's own previous state.
    {
        let w = count_dp(nbrs, None, max_product);
        let mass = w.iter().fold(0.0, |a, &v| fold(a, v, max_product));
        let mut from_zero = 0.0;
        for (c, &wc) in w.iter().enumerate() {
            from_zero = fold(from_zero, wc * child_given_count(c), max_product);
        }
        out.push(normalize([from_zero, mass * from_infected])?);
    }

    // Neighbor slots: sum out the own state and the remaining neighbors.
    for q in 0..nbrs.len() {
        let w = count_dp(nbrs, Some(q), max_product);
        let mass = w.iter().fold(0.0, |a, &v| fold(a, v, max_product));
        let mut val = [0.0; 2];
        for (neighbor_state, slot) in val.iter_mut().enumerate() {
            let from_one = own[1] * mass * from_infected;
            let mut from_zero = 0.0;
            for (c, &wc) in w.iter().enumerate() {
                from_zero = fold(
                    from_zero,
                    wc * child_given_count(c + neighbor_state),
                    max_product,
                );
            }
            *slot = fold(from_one, own[0] * from_zero, max_product);
        }
        out.push(normalize(val)?);
    }
    Ok(out)
}

/// Recompute the child-directed messages the variable (person, day) sends
/// to each factor it parents: the belief divided by that factor's incoming
/// message, with tiny components rebuilt from explicit leave-one-out
/// products. Returns `(factor, slot, table)` triples; the store is not
/// modified.
pub fn update_pi(
    store: &MessageStore,
    graph: &FactorGraph,
    person: usize,
    day: usize,
) -> Result<Vec<(usize, usize, [f64; 2])>> {
    let pv = pi_value(store, graph, person, day, false)?;
    let lv = lambda_value(store, graph, person, day);
    let bel = normalize([pv[0] * lv[0], pv[1] * lv[1]])?;
    let vid = graph.variable_id(person, day);
    variable_pi_updates(store, graph, vid, pv, bel, false)
}

fn variable_pi_updates(
    store: &MessageStore,
    graph: &FactorGraph,
    vid: usize,
    pi_val: [f64; 2],
    belief: [f64; 2],
    _max_product: bool,
) -> Result<Vec<(usize, usize, [f64; 2])>> {
    let outs = &graph.out_factors[vid];
    let mut res = Vec::with_capacity(outs.len());
    for &(fid, slot) in outs {
        let incoming = store.lambda[fid][slot];
        let table = if incoming[0] >= DIVISION_GUARD && incoming[1] >= DIVISION_GUARD {
            normalize([belief[0] / incoming[0], belief[1] / incoming[1]])?
        } else {
            // Explicit leave-one-out product, analytically identical.
            let mut val = [
                pi_val[0] * store.emission[vid][0],
                pi_val[1] * store.emission[vid][1],
            ];
            for &(g, s) in outs {
                if (g, s) == (fid, slot) {
                    continue;
                }
                let m = store.lambda[g][s];
                val[0] *= m[0];
                val[1] *= m[1];
            }
            normalize(val)?
        };
        res.push((fid, slot, table));
    }
    Ok(res)
}

/// One synchronous sweep: all λ and π messages recomputed from the
/// previous store.
fn sweep(
    store: &MessageStore,
    graph: &FactorGraph,
    arrays: &VariableArrays,
    max_product: bool,
) -> Result<MessageStore> {
    let n_factors = graph.parents.len();
    let new_lambda_res: Vec<Result<Vec<[f64; 2]>>> = map_collect(n_factors, |fid| {
        let child_lambda = arrays.lambda_val[graph.child[fid]];
        factor_lambda_updates(store, graph, fid, child_lambda, max_product)
    });
    let mut new_lambda = Vec::with_capacity(n_factors);
    for item in new_lambda_res {
        new_lambda.push(item?);
    }

    let n_vars = graph.n_people * (graph.t_days + 1);
    let pi_updates_res: Vec<Result<Vec<(usize, usize, [f64; 2])>>> = map_collect(n_vars, |vid| {
        variable_pi_updates(
            store,
            graph,
            vid,
            arrays.pi_val[vid],
            arrays.beliefs[vid],
            max_product,
        )
    });
    let mut new_pi: Vec<Vec<[f64; 2]>> = graph
        .parents
        .iter()
        .map(|ps| vec![[1.0, 1.0]; ps.len()])
        .collect();
    for item in pi_updates_res {
        for (fid, slot, table) in item? {
            new_pi[fid][slot] = table;
        }
    }

    Ok(MessageStore {
        pi: new_pi,
        lambda: new_lambda,
        emission: store.emission.clone(),
    })
}

/// Sweep controls for [`run_forward_backward`] and [`viterbi`].
#[derive(Debug, Clone, Copy)]
pub struct BpOptions {
    pub max_sweeps: usize,
    pub tol: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            max_sweeps: 50,
            tol: 1e-6,
        }
    }
}

/// Result of a sum-product run.
#[derive(Debug, Clone)]
pub struct BpResult {
    /// P(infected) per person per day, N × (T+1).
    pub p_infected: Array2<f64>,
    pub converged: bool,
    pub sweeps_run: usize,
}

fn beliefs_to_array(graph: &FactorGraph, beliefs: &[[f64; 2]]) -> Array2<f64> {
    let mut out = Array2::zeros((graph.n_people, graph.t_days + 1));
    for person in 0..graph.n_people {
        for day in 0..=graph.t_days {
            out[(person, day)] = beliefs[graph.variable_id(person, day)][1];
        }
    }
    out
}

fn run_sweeps(
    graph: &FactorGraph,
    symptoms: &SymptomTensor,
    options: &BpOptions,
    max_product: bool,
) -> Result<(Vec<[f64; 2]>, bool, usize)> {
    if options.max_sweeps == 0 {
        return Err(Error::domain("max_sweeps must be at least 1"));
    }
    let mut store = init_messages(graph, symptoms);
    let mut prev_beliefs: Option<Vec<[f64; 2]>> = None;
    let mut converged = false;
    let mut sweeps_run = 0;
    for _ in 0..options.max_sweeps {
        let arrays = variable_arrays(&store, graph, max_product)?;
        if let Some(prev) = &prev_beliefs {
            let diff = arrays
                .beliefs
                .iter()
                .zip(prev.iter())
                .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
                .fold(0.0, f64::max);
            if diff < options.tol {
                converged = true;
                break;
            }
        }
        store = sweep(&store, graph, &arrays, max_product)?;
        sweeps_run += 1;
        prev_beliefs = Some(arrays.beliefs);
    }
    // Beliefs reflecting the final message state.
    let arrays = variable_arrays(&store, graph, max_product)?;
    Ok((arrays.beliefs, converged, sweeps_run))
}

/// Sum-product sweeps until beliefs settle or the budget runs out.
pub fn run_forward_backward(
    graph: &FactorGraph,
    symptoms: &SymptomTensor,
    options: &BpOptions,
) -> Result<BpResult> {
    let (beliefs, converged, sweeps_run) = run_sweeps(graph, symptoms, options, false)?;
    Ok(BpResult {
        p_infected: beliefs_to_array(graph, &beliefs),
        converged,
        sweeps_run,
    })
}

/// Max-product decoding: the same message schedule with sums replaced by
/// maxima, decoded by per-variable argmax. Ties resolve to susceptible.
pub fn viterbi(
    graph: &FactorGraph,
    symptoms: &SymptomTensor,
    options: &BpOptions,
) -> Result<StateMatrix> {
    let (beliefs, _, _) = run_sweeps(graph, symptoms, options, true)?;
    let mut decoded = StateMatrix::zeros(graph.n_people, graph.t_days);
    for person in 0..graph.n_people {
        for day in 0..=graph.t_days {
            let b = beliefs[graph.variable_id(person, day)];
            decoded.set(person, day, u8::from(b[1] > b[0]));
        }
    }
    Ok(decoded)
}
