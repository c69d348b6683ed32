//! Damped Newton ascent with backtracking, for the coefficient M-step.

use ndarray::Array2;

use crate::error::Result;
use crate::linalg::{cholesky, cholesky_solve};

use super::objective::ObjectiveEval;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// Outcome of a bounded Newton run.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub eta: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Ascent direction solving `(−H + λI) d = g` with the smallest shift λ
/// that makes the system positive definite.
fn ascent_direction(hessian: &Array2<f64>, gradient: &[f64]) -> Option<Vec<f64>> {
    let dim = gradient.len();
    let mut neg_h = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            neg_h[(i, j)] = -hessian[(i, j)];
        }
    }
    let scale = (0..dim).map(|i| neg_h[(i, i)].abs()).fold(1e-12, f64::max);
    let mut shift = 0.0;
    for _ in 0..60 {
        let mut shifted = neg_h.clone();
        for i in 0..dim {
            shifted[(i, i)] += shift;
        }
        if let Some(l) = cholesky(&shifted) {
            return Some(cholesky_solve(&l, gradient));
        }
        shift = if shift == 0.0 { scale * 1e-8 } else { shift * 10.0 };
    }
    None
}

/// A few damped Newton iterations from `eta0`, maximizing the objective.
/// Every accepted step satisfies an Armijo increase condition, so the
/// objective never decreases; full convergence is not required.
pub fn newton_step<F>(objective: F, eta0: &[f64], max_inner: usize) -> Result<NewtonReport>
where
    F: Fn(&[f64]) -> Result<ObjectiveEval>,
{
    let mut eta = eta0.to_vec();
    let mut eval = objective(&eta)?;
    let mut warnings = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_inner {
        if eval.grad_inf_norm() < 1e-10 {
            break;
        }
        let (direction, used_gradient) = match ascent_direction(&eval.hessian, &eval.gradient) {
            Some(d) => (d, false),
            None => {
                warnings.push(
                    "regularized curvature solve failed; falling back to gradient ascent"
                        .to_string(),
                );
                let norm = eval.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
                (eval.gradient.iter().map(|g| g / norm.max(1e-300)).collect(), true)
            }
        };
        let slope: f64 = eval
            .gradient
            .iter()
            .zip(direction.iter())
            .map(|(g, d)| g * d)
            .sum();
        if slope <= 0.0 {
            if used_gradient {
                break;
            }
            warnings.push("search direction lost ascent; stopping".to_string());
            break;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = eta
                .iter()
                .zip(direction.iter())
                .map(|(e, d)| e + step * d)
                .collect();
            match objective(&trial) {
                Ok(trial_eval)
                    if trial_eval.value.is_finite()
                        && trial_eval.value >= eval.value + ARMIJO_C * step * slope =>
                {
                    accepted = Some((trial, trial_eval));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        match accepted {
            Some((new_eta, new_eval)) => {
                let improvement = new_eval.value - eval.value;
                eta = new_eta;
                eval = new_eval;
                iterations += 1;
                if improvement < 1e-12 {
                    break;
                }
            }
            None => {
                warnings.push("backtracking exhausted without an acceptable step".to_string());
                break;
            }
        }
    }

    Ok(NewtonReport {
        grad_inf_norm: eval.grad_inf_norm(),
        value: eval.value,
        eta,
        iterations,
        warnings,
    })
}

/// Diminishing step-size sequence `δ(k) = 1/k`: starts at one, vanishes,
/// has unit consecutive ratio in the limit and a divergent sum.
pub fn step_size_schedule(k: usize) -> f64 {
    assert!(k >= 1, "schedule is defined for k >= 1");
    1.0 / k as f64
}
