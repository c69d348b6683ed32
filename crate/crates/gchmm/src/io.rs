//! File formats shared with the CLI: CSV emitters/readers for states and
//! marginals plus JSON for parameters, coefficients and metrics. All
//! output is UTF-8 with LF line endings; node ids are written 1-based.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::data::{StateMatrix, SymptomTensor};
use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::sim::{InfectionParams, LinkCoefficients};

/// Write hidden states as `node,day,state` rows over all N × (T+1) cells.
pub fn write_states(path: impl AsRef<Path>, states: &StateMatrix) -> Result<()> {
    let mut out = String::from("node,day,state\n");
    for person in 0..states.n_people() {
        for day in 0..=states.n_days() {
            out.push_str(&format!("{},{},{}\n", person + 1, day, states.get(person, day)));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a `node,day,state` file back into a state matrix.
pub fn read_states(path: impl AsRef<Path>) -> Result<StateMatrix> {
    let text = fs::read_to_string(path)?;
    let mut cells = Vec::new();
    let (mut max_node, mut max_day) = (0usize, 0usize);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if idx == 0 && fields[0] == "node" {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::parse(idx + 1, "expected node,day,state"));
        }
        let node: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(idx + 1, "invalid node id"))?;
        let day: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(idx + 1, "invalid day"))?;
        let state: u8 = fields[2]
            .parse()
            .map_err(|_| Error::parse(idx + 1, "invalid state"))?;
        if node == 0 || state > 1 {
            return Err(Error::parse(idx + 1, "node must be 1-based and state binary"));
        }
        max_node = max_node.max(node);
        max_day = max_day.max(day);
        cells.push((node - 1, day, state));
    }
    if cells.is_empty() {
        return Err(Error::domain("state file has no rows"));
    }
    let mut states = StateMatrix::zeros(max_node, max_day);
    for (person, day, state) in cells {
        states.set(person, day, state);
    }
    Ok(states)
}

/// Write per-cell infection probabilities as `node,day,p_infected` rows.
pub fn write_marginals(path: impl AsRef<Path>, p_infected: &Array2<f64>) -> Result<()> {
    let (n, cols) = p_infected.dim();
    let mut out = String::from("node,day,p_infected\n");
    for person in 0..n {
        for day in 0..cols {
            out.push_str(&format!("{},{},{}\n", person + 1, day, p_infected[(person, day)]));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a `node,day,p_infected` file.
pub fn read_marginals(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path)?;
    let mut cells = Vec::new();
    let (mut max_node, mut max_day) = (0usize, 0usize);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if idx == 0 && fields[0] == "node" {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::parse(idx + 1, "expected node,day,p_infected"));
        }
        let node: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(idx + 1, "invalid node id"))?;
        let day: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(idx + 1, "invalid day"))?;
        let p: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(idx + 1, "invalid probability"))?;
        if node == 0 || !(0.0..=1.0).contains(&p) {
            return Err(Error::parse(idx + 1, "node must be 1-based, p in [0,1]"));
        }
        max_node = max_node.max(node);
        max_day = max_day.max(day);
        cells.push((node - 1, day, p));
    }
    if cells.is_empty() {
        return Err(Error::domain("marginal file has no rows"));
    }
    let mut out = Array2::zeros((max_node, max_day + 1));
    for (person, day, p) in cells {
        out[(person, day)] = p;
    }
    Ok(out)
}

/// Write observed symptom cells as `node,day,symptom,value` rows; missing
/// cells are omitted and read back as missing.
pub fn write_symptoms(path: impl AsRef<Path>, symptoms: &SymptomTensor) -> Result<()> {
    let mut out = String::from("node,day,symptom,value\n");
    for (person, day, s, v) in symptoms.observed_cells() {
        out.push_str(&format!("{},{},{},{}\n", person + 1, day, s + 1, v));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ParamsFile {
    gamma: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    pi: f64,
    theta: Vec<Vec<f64>>,
}

/// Write infection parameters as JSON.
pub fn write_params(path: impl AsRef<Path>, params: &InfectionParams) -> Result<()> {
    let file = ParamsFile {
        gamma: params.gamma.clone(),
        alpha: params.alpha.clone(),
        beta: params.beta.clone(),
        pi: params.pi,
        theta: params
            .theta
            .outer_iter()
            .map(|row| row.to_vec())
            .collect(),
    };
    let mut f = fs::File::create(path)?;
    let body = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::numerical(format!("serialize parameters: {e}")))?;
    writeln!(f, "{body}")?;
    Ok(())
}

/// Read infection parameters from JSON.
pub fn read_params(path: impl AsRef<Path>) -> Result<InfectionParams> {
    let text = fs::read_to_string(path)?;
    let file: ParamsFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(0, format!("parameter JSON: {e}")))?;
    if file.theta.len() != 2 {
        return Err(Error::domain("theta needs exactly two state rows"));
    }
    let s = file.theta[0].len();
    if file.theta[1].len() != s {
        return Err(Error::domain("theta rows must share a length"));
    }
    let mut theta = Array2::zeros((2, s));
    for (i, row) in file.theta.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            theta[(i, j)] = v;
        }
    }
    InfectionParams::new(file.gamma, file.alpha, file.beta, file.pi, theta)
}

#[derive(serde::Serialize)]
struct EtaFile<'a> {
    link: &'a str,
    features: Vec<String>,
    roles: serde_json::Value,
}

/// Write link coefficients as JSON with per-feature names (`intercept`,
/// then `f1`, `f2`, ... unless names are supplied).
pub fn write_eta(
    path: impl AsRef<Path>,
    eta: &LinkCoefficients,
    feature_names: Option<&[String]>,
) -> Result<()> {
    let k = eta.dim();
    let features: Vec<String> = match feature_names {
        Some(names) => names.to_vec(),
        None => (0..k)
            .map(|i| {
                if i == 0 {
                    "intercept".to_string()
                } else {
                    format!("f{i}")
                }
            })
            .collect(),
    };
    let file = match eta {
        LinkCoefficients::Sigmoid {
            recovery,
            outside,
            inside,
        } => EtaFile {
            link: "sigmoid",
            features,
            roles: serde_json::json!({
                "recovery": recovery,
                "outside": outside,
                "inside": inside,
            }),
        },
        LinkCoefficients::BetaExp {
            recovery,
            outside,
            inside,
        } => EtaFile {
            link: "beta_exp",
            features,
            roles: serde_json::json!({
                "recovery": { "shape1": recovery[0], "shape2": recovery[1] },
                "outside": { "shape1": outside[0], "shape2": outside[1] },
                "inside": { "shape1": inside[0], "shape2": inside[1] },
            }),
        },
    };
    let body = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::numerical(format!("serialize coefficients: {e}")))?;
    fs::write(path, format!("{body}\n"))?;
    Ok(())
}

/// Write metrics as a single JSON object.
pub fn write_metrics(path: impl AsRef<Path>, metrics: &Metrics) -> Result<()> {
    let body = serde_json::to_string_pretty(metrics)
        .map_err(|e| Error::numerical(format!("serialize metrics: {e}")))?;
    fs::write(path, format!("{body}\n"))?;
    Ok(())
}

/// Write probabilities as a node × day grid (one row per node, one column
/// per day), for external heatmap plotting.
pub fn write_probability_grid(path: impl AsRef<Path>, p_infected: &Array2<f64>) -> Result<()> {
    let (n, cols) = p_infected.dim();
    let mut out = String::from("node");
    for day in 0..cols {
        out.push_str(&format!(",day{day}"));
    }
    out.push('\n');
    for person in 0..n {
        out.push_str(&format!("{}", person + 1));
        for day in 0..cols {
            out.push_str(&format!(",{}", p_infected[(person, day)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write the external-to-internal id mapping emitted with all outputs.
pub fn write_id_mapping(path: impl AsRef<Path>, n_people: usize) -> Result<()> {
    let mut out = String::from("internal,external\n");
    for i in 0..n_people {
        out.push_str(&format!("{},{}\n", i, i + 1));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Append-style JSONL writer for parameter draws.
pub fn write_param_draws(
    path: impl AsRef<Path>,
    draws: &[crate::gibbs::ParamDraw],
) -> Result<()> {
    let mut out = String::new();
    for d in draws {
        let line = serde_json::to_string(d)
            .map_err(|e| Error::numerical(format!("serialize draw: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
