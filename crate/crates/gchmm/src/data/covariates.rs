//! Per-person covariates and PCA preprocessing.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Per-person covariate rows, N × K, with a constant-1 intercept in
/// column 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    values: Array2<f64>,
}

impl CovariateMatrix {
    /// Build from raw feature rows (without the intercept); the constant
    /// column is prepended here.
    pub fn from_features(features: Vec<Vec<f64>>) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::domain("covariate matrix needs at least one person"));
        }
        let k_features = features[0].len();
        let mut values = Array2::zeros((n, k_features + 1));
        for (i, row) in features.iter().enumerate() {
            if row.len() != k_features {
                return Err(Error::domain(format!(
                    "person {} has {} features, expected {k_features}",
                    i + 1,
                    row.len()
                )));
            }
            values[(i, 0)] = 1.0;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::domain(format!(
                        "non-finite covariate for person {} feature {}",
                        i + 1,
                        j + 1
                    )));
                }
                values[(i, j + 1)] = v;
            }
        }
        Ok(CovariateMatrix { values })
    }

    /// Intercept-only design for N people (K = 1).
    pub fn intercept_only(n_people: usize) -> Self {
        CovariateMatrix {
            values: Array2::ones((n_people, 1)),
        }
    }

    pub fn n_people(&self) -> usize {
        self.values.nrows()
    }

    /// Covariate dimension K including the intercept.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, person: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(person)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.values
    }

    /// Inner product of person `n`'s covariates with `coeffs`.
    pub fn dot(&self, person: usize, coeffs: &[f64]) -> f64 {
        debug_assert_eq!(coeffs.len(), self.dim());
        self.values
            .row(person)
            .iter()
            .zip(coeffs.iter())
            .map(|(z, e)| z * e)
            .sum()
    }
}

/// Load a covariate file: required header `node,f1,...`, one row per person.
pub fn load_covariates(path: impl AsRef<Path>, n_people: usize) -> Result<CovariateMatrix> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header line"))?;
    let n_fields = header.trim_end_matches('\r').split(',').count();
    if n_fields < 1 {
        return Err(Error::parse(1, "header must name at least the node column"));
    }
    let k_features = n_fields - 1;

    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n_people];
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').map(str::trim).collect();
        if fields.len() != n_fields {
            return Err(Error::parse(
                line_no,
                format!("expected {n_fields} fields, got {}", fields.len()),
            ));
        }
        let node: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid node id {:?}", fields[0])))?;
        if node == 0 || node > n_people {
            return Err(Error::domain(format!(
                "node id {node} outside 1..={n_people} (line {line_no})"
            )));
        }
        if rows[node - 1].is_some() {
            return Err(Error::Conflict(format!(
                "duplicate covariate row for node {node} (line {line_no})"
            )));
        }
        let mut feats = Vec::with_capacity(k_features);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("non-numeric feature {f:?}")))?;
            feats.push(v);
        }
        rows[node - 1] = Some(feats);
    }
    let mut features = Vec::with_capacity(n_people);
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => features.push(r),
            None => {
                return Err(Error::domain(format!("missing covariate row for node {}", i + 1)))
            }
        }
    }
    CovariateMatrix::from_features(features)
}

/// Result of [`pca_reduce`]: the reduced design plus per-component
/// explained-variance ratios.
#[derive(Debug, Clone)]
pub struct PcaResult {
    pub reduced: CovariateMatrix,
    pub explained_variance_ratio: Vec<f64>,
}

/// Project the non-intercept covariates onto their top principal
/// components and return the intercept column plus component scores.
///
/// With `standardize` set (the default preprocessing), features are scaled
/// to zero mean and unit variance before the decomposition so that
/// heterogeneous units do not dominate; otherwise they are only centered.
pub fn pca_reduce(
    covariates: &CovariateMatrix,
    num_components: usize,
    standardize: bool,
) -> Result<PcaResult> {
    let n = covariates.n_people();
    let k_features = covariates.dim() - 1;
    if num_components == 0 {
        return Err(Error::domain("num_components must be positive"));
    }
    if num_components > k_features {
        return Err(Error::domain(format!(
            "num_components {num_components} exceeds feature count {k_features}"
        )));
    }
    if n < 2 {
        return Err(Error::domain("PCA needs at least two people"));
    }

    // Center (and optionally scale) the non-intercept block.
    let mut x = Array2::<f64>::zeros((n, k_features));
    for j in 0..k_features {
        let col = covariates.as_array().column(j + 1);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let scale = if standardize && var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            x[(i, j)] = (col[i] - mean) / scale;
        }
    }

    // Sample covariance of the preprocessed block.
    let mut cov = Array2::<f64>::zeros((k_features, k_features));
    for a in 0..k_features {
        for b in a..k_features {
            let v = x.column(a).dot(&x.column(b)) / (n as f64 - 1.0);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let (eigenvalues, eigenvectors) = symmetric_eigen(&cov);
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let ratios: Vec<f64> = (0..num_components)
        .map(|i| {
            if total > 0.0 {
                eigenvalues[i].max(0.0) / total
            } else {
                0.0
            }
        })
        .collect();

    let mut reduced = Array2::<f64>::zeros((n, num_components + 1));
    for i in 0..n {
        reduced[(i, 0)] = 1.0;
        for c in 0..num_components {
            let score: f64 = (0..k_features).map(|j| x[(i, j)] * eigenvectors[(j, c)]).sum();
            reduced[(i, c + 1)] = score;
        }
    }
    Ok(PcaResult {
        reduced: CovariateMatrix { values: reduced },
        explained_variance_ratio: ratios,
    })
}

/// Eigen-based effective rank helper used when choosing how many
/// components to keep: smallest count whose cumulative ratio reaches
/// `target` (e.g. 0.999).
pub fn components_for_variance(
    covariates: &CovariateMatrix,
    target: f64,
    standardize: bool,
) -> Result<usize> {
    let k_features = covariates.dim() - 1;
    if k_features == 0 {
        return Err(Error::domain("no features to decompose"));
    }
    let full = pca_reduce(covariates, k_features, standardize)?;
    let mut cumulative = 0.0;
    for (i, r) in full.explained_variance_ratio.iter().enumerate() {
        cumulative += r;
        if cumulative >= target {
            return Ok(i + 1);
        }
    }
    Ok(k_features)
}
