//! Dynamic contact networks: one undirected snapshot per tracked day.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-day undirected contact graphs over a fixed person set.
///
/// Day indices are 1-based: `G_t` holds the contacts made during the
/// interval `(t−1, t]` and conditions the transition into the day-`t`
/// states. Snapshots are immutable after construction.
#[derive(Debug, Clone)]
pub struct DynamicNetwork {
    n_people: usize,
    /// `adjacency[t−1][n]` = sorted neighbor list of `n` in `G_t`.
    adjacency: Vec<Vec<Vec<usize>>>,
    max_degree: usize,
}

impl DynamicNetwork {
    /// Build from one edge list per day. Edges are unordered pairs; reversed
    /// duplicates collapse. Self-loops and out-of-range endpoints are errors.
    pub fn from_edge_lists(n_people: usize, days: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        if n_people == 0 {
            return Err(Error::domain("network needs at least one person"));
        }
        let mut adjacency = Vec::with_capacity(days.len());
        let mut max_degree = 0;
        for (d, edges) in days.iter().enumerate() {
            let mut nbrs = vec![Vec::new(); n_people];
            for &(i, j) in edges {
                if i == j {
                    return Err(Error::domain(format!("self-loop on node {i} at day {}", d + 1)));
                }
                if i >= n_people || j >= n_people {
                    return Err(Error::domain(format!(
                        "edge ({i}, {j}) at day {} out of range for {n_people} people",
                        d + 1
                    )));
                }
                nbrs[i].push(j);
                nbrs[j].push(i);
            }
            for list in nbrs.iter_mut() {
                list.sort_unstable();
                list.dedup();
                max_degree = max_degree.max(list.len());
            }
            adjacency.push(nbrs);
        }
        Ok(DynamicNetwork {
            n_people,
            adjacency,
            max_degree,
        })
    }

    pub fn n_people(&self) -> usize {
        self.n_people
    }

    /// Number of tracked days (T).
    pub fn n_days(&self) -> usize {
        self.adjacency.len()
    }

    /// Maximum node degree over all snapshots (M).
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Sorted neighbors of `person` in `G_day`, `day ∈ 1..=T`.
    pub fn neighbors(&self, day: usize, person: usize) -> &[usize] {
        &self.adjacency[day - 1][person]
    }

    /// Edges of `G_day` as pairs with `i < j`.
    pub fn edges(&self, day: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nbrs) in self.adjacency[day - 1].iter().enumerate() {
            for &j in nbrs {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn degree(&self, day: usize, person: usize) -> usize {
        self.adjacency[day - 1][person].len()
    }
}

fn split_csv_line(line: &str) -> Vec<&str> {
    line.trim_end_matches('\r').split(',').map(str::trim).collect()
}

fn looks_like_header(fields: &[&str]) -> bool {
    fields
        .first()
        .is_some_and(|f| f.parse::<f64>().is_err() && !f.is_empty())
}

/// Parse a 1-based node id into a dense 0-based index, validating range.
fn parse_node(field: &str, n_people: usize, line: usize) -> Result<usize> {
    let id: usize = field
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid node id {field:?}")))?;
    if id == 0 || id > n_people {
        return Err(Error::domain(format!(
            "node id {id} outside 1..={n_people} (line {line})"
        )));
    }
    Ok(id - 1)
}

/// Load a day-stamped contact list.
///
/// Rows are `day,node_i,node_j[,duration_minutes]`. Durations for the same
/// pair on the same day accumulate; a pair qualifies as an edge once its
/// total duration reaches `duration_threshold`. A row without a duration
/// field counts as one qualifying contact on its own. Days with no rows
/// yield empty snapshots.
pub fn load_network(
    path: impl AsRef<Path>,
    duration_threshold: f64,
    n_people: usize,
    n_days: usize,
) -> Result<DynamicNetwork> {
    if duration_threshold < 0.0 {
        return Err(Error::domain("duration threshold must be nonnegative"));
    }
    let text = fs::read_to_string(path)?;
    // (day, i, j) -> (accumulated minutes, saw a duration-free row)
    let mut contacts: BTreeMap<(usize, usize, usize), (f64, bool)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields = split_csv_line(line);
        if idx == 0 && looks_like_header(&fields) {
            continue;
        }
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::parse(
                line_no,
                format!("expected day,node_i,node_j[,duration], got {} fields", fields.len()),
            ));
        }
        let day: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid day {:?}", fields[0])))?;
        if day == 0 || day > n_days {
            return Err(Error::domain(format!(
                "day {day} outside 1..={n_days} (line {line_no})"
            )));
        }
        let i = parse_node(fields[1], n_people, line_no)?;
        let j = parse_node(fields[2], n_people, line_no)?;
        if i == j {
            return Err(Error::domain(format!("self-contact on node {} (line {line_no})", i + 1)));
        }
        let key = (day, i.min(j), i.max(j));
        let entry = contacts.entry(key).or_insert((0.0, false));
        if fields.len() == 4 && !fields[3].is_empty() {
            let dur: f64 = fields[3]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid duration {:?}", fields[3])))?;
            if dur < 0.0 {
                return Err(Error::parse(line_no, "negative duration"));
            }
            entry.0 += dur;
        } else {
            entry.1 = true;
        }
    }

    let mut days = vec![Vec::new(); n_days];
    for (&(day, i, j), &(total, bare)) in &contacts {
        if bare || total >= duration_threshold {
            days[day - 1].push((i, j));
        }
    }
    DynamicNetwork::from_edge_lists(n_people, days)
}

/// Scan a contact file for the largest node id and day, for dimension
/// inference when the caller does not pin them.
pub fn probe_contact_file(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let text = fs::read_to_string(path)?;
    let mut max_node = 0usize;
    let mut max_day = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields = split_csv_line(line);
        if idx == 0 && looks_like_header(&fields) {
            continue;
        }
        if fields.len() < 3 {
            continue;
        }
        if let (Ok(day), Ok(i), Ok(j)) = (
            fields[0].parse::<usize>(),
            fields[1].parse::<usize>(),
            fields[2].parse::<usize>(),
        ) {
            max_day = max_day.max(day);
            max_node = max_node.max(i).max(j);
        }
    }
    Ok((max_node, max_day))
}

/// Synthetic scale-free dynamic network with a hard degree cap.
///
/// A preferential-attachment skeleton is grown with `attach_per_node` links
/// per arriving node, rejecting attachments that would push either endpoint
/// past `max_degree`. Each day keeps each skeleton edge independently with
/// probability `edge_keep_prob`. Deterministic in `seed`.
pub fn synthetic_scale_free(
    n_people: usize,
    n_days: usize,
    max_degree: usize,
    attach_per_node: usize,
    edge_keep_prob: f64,
    seed: u64,
) -> DynamicNetwork {
    assert!(n_people >= 3 && max_degree >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n_people];
    let mut skeleton: Vec<(usize, usize)> = Vec::new();
    let mut adj = vec![Vec::new(); n_people];

    let add_edge = |skeleton: &mut Vec<(usize, usize)>,
                        adj: &mut Vec<Vec<usize>>,
                        degree: &mut Vec<usize>,
                        i: usize,
                        j: usize| {
        skeleton.push((i.min(j), i.max(j)));
        adj[i].push(j);
        adj[j].push(i);
        degree[i] += 1;
        degree[j] += 1;
    };

    add_edge(&mut skeleton, &mut adj, &mut degree, 0, 1);
    add_edge(&mut skeleton, &mut adj, &mut degree, 1, 2);
    add_edge(&mut skeleton, &mut adj, &mut degree, 0, 2);

    for new in 3..n_people {
        let mut attached = Vec::new();
        let mut guard = 0;
        while attached.len() < attach_per_node.min(new) && guard < 200 {
            guard += 1;
            // Preferential attachment: pick an endpoint of a random edge.
            let (a, b) = skeleton[rng.random_range(0..skeleton.len())];
            let target = if rng.random_bool(0.5) { a } else { b };
            if target == new
                || attached.contains(&target)
                || degree[target] >= max_degree
                || degree[new] >= max_degree
            {
                continue;
            }
            attached.push(target);
            add_edge(&mut skeleton, &mut adj, &mut degree, new, target);
        }
        if attached.is_empty() {
            // Fall back to any node with spare degree so nobody is isolated.
            if let Some(target) = (0..new).find(|&v| degree[v] < max_degree) {
                add_edge(&mut skeleton, &mut adj, &mut degree, new, target);
            }
        }
    }

    let days = (0..n_days)
        .map(|_| {
            skeleton
                .iter()
                .copied()
                .filter(|_| rng.random_bool(edge_keep_prob))
                .collect()
        })
        .collect();
    DynamicNetwork::from_edge_lists(n_people, days).expect("generator invariants")
}
