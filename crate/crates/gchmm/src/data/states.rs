//! Hidden infection states and observed symptom tensors.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Binary infection states, shape N × (T+1). Column 0 is the initial state
/// and carries no emission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMatrix {
    values: Array2<u8>,
}

impl StateMatrix {
    pub fn zeros(n_people: usize, n_days: usize) -> Self {
        StateMatrix {
            values: Array2::zeros((n_people, n_days + 1)),
        }
    }

    pub fn from_array(values: Array2<u8>) -> Result<Self> {
        if values.iter().any(|&v| v > 1) {
            return Err(Error::domain("state entries must be 0 or 1"));
        }
        if values.ncols() < 2 {
            return Err(Error::domain("state matrix needs an initial column plus days"));
        }
        Ok(StateMatrix { values })
    }

    pub fn n_people(&self) -> usize {
        self.values.nrows()
    }

    /// Tracked days T; the matrix has T+1 columns.
    pub fn n_days(&self) -> usize {
        self.values.ncols() - 1
    }

    /// State of `person` at `day ∈ 0..=T`.
    #[inline]
    pub fn get(&self, person: usize, day: usize) -> u8 {
        self.values[(person, day)]
    }

    #[inline]
    pub fn set(&mut self, person: usize, day: usize, value: u8) {
        debug_assert!(value <= 1);
        self.values[(person, day)] = value;
    }

    pub fn as_array(&self) -> &Array2<u8> {
        &self.values
    }

    /// Fraction of cells agreeing with `other`, over all N × (T+1) cells.
    pub fn agreement(&self, other: &StateMatrix) -> f64 {
        assert_eq!(self.values.dim(), other.values.dim());
        let total = self.values.len() as f64;
        let same = self
            .values
            .iter()
            .zip(other.values.iter())
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / total
    }
}

/// Binary symptom observations with an explicit missing mask, N × T × S.
/// Day indices are 1-based; day `t` observations are emitted by the day-`t`
/// states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymptomTensor {
    /// −1 = missing, otherwise 0/1.
    values: Array3<i8>,
}

impl SymptomTensor {
    pub fn missing(n_people: usize, n_days: usize, n_symptoms: usize) -> Self {
        SymptomTensor {
            values: Array3::from_elem((n_people, n_days, n_symptoms), -1),
        }
    }

    pub fn n_people(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_days(&self) -> usize {
        self.values.dim().1
    }

    pub fn n_symptoms(&self) -> usize {
        self.values.dim().2
    }

    /// Observation for `person` on `day ∈ 1..=T`, `None` when missing.
    #[inline]
    pub fn get(&self, person: usize, day: usize, symptom: usize) -> Option<u8> {
        let v = self.values[(person, day - 1, symptom)];
        (v >= 0).then_some(v as u8)
    }

    #[inline]
    pub fn set(&mut self, person: usize, day: usize, symptom: usize, value: Option<u8>) {
        self.values[(person, day - 1, symptom)] = match value {
            Some(v) => {
                debug_assert!(v <= 1);
                v as i8
            }
            None => -1,
        };
    }

    pub fn n_observed(&self) -> usize {
        self.values.iter().filter(|&&v| v >= 0).count()
    }

    pub fn n_missing(&self) -> usize {
        self.values.len() - self.n_observed()
    }

    /// All observed cells as `(person, day, symptom, value)` in row order.
    pub fn observed_cells(&self) -> impl Iterator<Item = (usize, usize, usize, u8)> + '_ {
        self.values.indexed_iter().filter_map(|((n, t, s), &v)| {
            (v >= 0).then_some((n, t + 1, s, v as u8))
        })
    }
}

/// Load a symptom report file with rows `node,day,symptom,value` and
/// `value ∈ {0, 1, NA}`. Unlisted cells stay missing; duplicate cells are
/// conflicts.
pub fn load_symptoms(
    path: impl AsRef<Path>,
    n_people: usize,
    n_days: usize,
    n_symptoms: usize,
) -> Result<SymptomTensor> {
    let text = fs::read_to_string(path)?;
    let mut tensor = SymptomTensor::missing(n_people, n_days, n_symptoms);
    let mut seen: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<usize>().is_err() && !fields[0].is_empty() {
            continue; // header
        }
        if fields.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected node,day,symptom,value, got {} fields", fields.len()),
            ));
        }
        let node: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid node id {:?}", fields[0])))?;
        let day: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid day {:?}", fields[1])))?;
        let symptom: usize = fields[2]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid symptom {:?}", fields[2])))?;
        if node == 0 || node > n_people {
            return Err(Error::domain(format!(
                "node id {node} outside 1..={n_people} (line {line_no})"
            )));
        }
        if day == 0 || day > n_days {
            return Err(Error::domain(format!(
                "day {day} outside 1..={n_days} (line {line_no})"
            )));
        }
        if symptom == 0 || symptom > n_symptoms {
            return Err(Error::domain(format!(
                "symptom {symptom} outside 1..={n_symptoms} (line {line_no})"
            )));
        }
        let cell = (node - 1, day, symptom - 1);
        if !seen.insert(cell) {
            return Err(Error::Conflict(format!(
                "duplicate entry for node {node}, day {day}, symptom {symptom} (line {line_no})"
            )));
        }
        let value = match fields[3] {
            "0" => Some(0),
            "1" => Some(1),
            "NA" => None,
            other => {
                return Err(Error::parse(
                    line_no,
                    format!("value must be 0, 1 or NA, got {other:?}"),
                ))
            }
        };
        tensor.set(cell.0, cell.1, cell.2, value);
    }
    Ok(tensor)
}

/// Scan a symptom file for the largest node, day and symptom indices.
pub fn probe_symptom_file(path: impl AsRef<Path>) -> Result<(usize, usize, usize)> {
    let text = fs::read_to_string(path)?;
    let (mut max_node, mut max_day, mut max_symptom) = (0usize, 0usize, 0usize);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<usize>().is_err() && !fields[0].is_empty() {
            continue;
        }
        if fields.len() != 4 {
            continue;
        }
        if let (Ok(n), Ok(t), Ok(s)) = (
            fields[0].parse::<usize>(),
            fields[1].parse::<usize>(),
            fields[2].parse::<usize>(),
        ) {
            max_node = max_node.max(n);
            max_day = max_day.max(t);
            max_symptom = max_symptom.max(s);
        }
    }
    Ok((max_node, max_day, max_symptom))
}
