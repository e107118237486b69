//! Class-weighted L2-regularized logistic regression, trained by
//! full-batch gradient descent with backtracking line search. The
//! intercept is not penalized.

use super::ClassWeights;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: u32,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            initial_step: 1.0,
            backtrack_factor: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_lambda: f64,
    /// Weighted training loss after each accepted epoch.
    pub loss_trace: Vec<f64>,
}

impl LogisticModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// Log-odds for one row.
    pub fn margin_row(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.weights.len());
        self.intercept
            + self
                .weights
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum::<f64>()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin_row(row))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)), overflow-safe.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Weighted negative log-likelihood plus (lambda/2)||w||^2, with its
/// gradient in (weights, intercept).
pub fn loss_and_gradient(
    x: &FeatureMatrix,
    y: &[u8],
    sample_weights: &[f64],
    weights: &[f64],
    intercept: f64,
    l2_lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let p = weights.len();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; p];
    let mut grad_b = 0.0;
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let z: f64 = intercept + weights.iter().zip(row).map(|(w, v)| w * v).sum::<f64>();
        let wi = sample_weights[i];
        let yi = y[i] as f64;
        loss += wi * (softplus(z) - yi * z);
        let residual = wi * (sigmoid(z) - yi);
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    let mut penalty = 0.0;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g += l2_lambda * w;
        penalty += w * w;
    }
    loss += 0.5 * l2_lambda * penalty;
    (loss, grad_w, grad_b)
}

/// Train by gradient descent; stops when the weight-normalized gradient
/// infinity-norm drops below `tol` or after `max_epochs`.
pub fn train_logistic(
    x: &FeatureMatrix,
    y: &[u8],
    class_weights: &ClassWeights,
    l2_lambda: f64,
    schedule: &LrSchedule,
    max_epochs: usize,
    tol: f64,
) -> Result<LogisticModel> {
    if x.n_rows() != y.len() {
        return Err(Error::config(format!(
            "train_logistic: {} rows vs {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let p = x.n_features();
    let sample_weights: Vec<f64> = y.iter().map(|&yi| class_weights.of(yi)).collect();
    let total_weight: f64 = sample_weights.iter().sum();

    let mut weights = vec![0.0; p];
    let mut intercept = 0.0;
    let mut step = schedule.initial_step;
    let mut loss_trace = Vec::new();

    let (mut loss, mut grad_w, mut grad_b) =
        loss_and_gradient(x, y, &sample_weights, &weights, intercept, l2_lambda);

    for epoch in 0..max_epochs {
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "logistic training diverged at epoch {epoch}: non-finite loss"
            )));
        }
        let grad_norm = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |a, g| a.max(g.abs()));
        if grad_norm / total_weight < tol {
            break;
        }

        let grad_sq: f64 =
            grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;
        let mut eta = step;
        let mut accepted = false;
        for attempt in 0..=schedule.max_backtracks {
            let cand_w: Vec<f64> = weights
                .iter()
                .zip(&grad_w)
                .map(|(w, g)| w - eta * g)
                .collect();
            let cand_b = intercept - eta * grad_b;
            let (cand_loss, cand_gw, cand_gb) =
                loss_and_gradient(x, y, &sample_weights, &cand_w, cand_b, l2_lambda);
            // Armijo sufficient decrease
            if cand_loss <= loss - 1e-4 * eta * grad_sq {
                weights = cand_w;
                intercept = cand_b;
                loss = cand_loss;
                grad_w = cand_gw;
                grad_b = cand_gb;
                if attempt == 0 {
                    step = eta * 2.0;
                } else {
                    step = eta;
                }
                accepted = true;
                break;
            }
            eta *= schedule.backtrack_factor;
        }
        loss_trace.push(loss / total_weight);
        if !accepted {
            break; // no descent step exists at the numeric floor
        }
    }

    if weights.iter().any(|w| !w.is_finite()) || !intercept.is_finite() {
        return Err(Error::numeric("logistic training produced non-finite weights"));
    }

    Ok(LogisticModel {
        weights,
        intercept,
        l2_lambda,
        loss_trace,
    })
}

/// Dense matrix over ad-hoc continuous columns, for unit tests.
#[cfg(test)]
pub(crate) fn synthetic_matrix(rows: &[&[f64]]) -> FeatureMatrix {
    use crate::features::{FeatureDictionary, FeatureKind};
    let p = rows[0].len();
    let defs: Vec<(String, FeatureKind)> = (0..p)
        .map(|j| (format!("f{j}"), FeatureKind::Continuous))
        .collect();
    let dict = FeatureDictionary::synthetic(&defs);
    let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
    let mut m = FeatureMatrix::new(dict, ids);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m.set(i, j, *v);
        }
    }
    m
}
