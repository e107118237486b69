//! Hyperparameter grid sweep for the tree models.
//!
//! A reproducible stand-in for "chosen based on convergence of error
//! rates": sweep n_estimators x max_depth, score 1 - AUC on a held-out
//! stratified validation slice of the training rows, and pick the
//! smallest configuration whose validation error is within 0.5% absolute
//! of the best.

use super::{train_boosted, train_forest, BoostedParams, ForestParams, ModelKind};
use super::{ClassWeights, Model};
use crate::error::{Error, Result};
use crate::eval::auc_roc;
use crate::features::FeatureMatrix;
use crate::seed::derive_indexed_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    /// Fraction of training rows held out for validation.
    pub validation_fraction: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_estimators: vec![50, 100, 200, 400],
            max_depth: vec![3, 5, 8],
            validation_fraction: 0.25,
        }
    }
}

/// Returns the chosen `(n_estimators, max_depth)`.
pub fn sweep_tree_hyperparams(
    x: &FeatureMatrix,
    y: &[u8],
    class_weights: &ClassWeights,
    kind: ModelKind,
    spec: &GridSpec,
    seed: u64,
) -> Result<(usize, usize)> {
    if kind == ModelKind::Logistic {
        return Err(Error::config("grid sweep applies to tree models only"));
    }
    let (inner_train, validation) = stratified_holdout(y, spec.validation_fraction, seed)?;
    let x_train = x.subset_rows(&inner_train);
    let y_train: Vec<u8> = inner_train.iter().map(|&i| y[i]).collect();
    let x_val = x.subset_rows(&validation);
    let y_val: Vec<u8> = validation.iter().map(|&i| y[i]).collect();

    let mut configs: Vec<(usize, usize)> = Vec::new();
    for &n in &spec.n_estimators {
        for &d in &spec.max_depth {
            configs.push((n, d));
        }
    }
    configs.sort();

    let mut errors = Vec::with_capacity(configs.len());
    for (ci, &(n_estimators, max_depth)) in configs.iter().enumerate() {
        let model = match kind {
            ModelKind::Forest => Model::Forest(train_forest(
                &x_train,
                &y_train,
                class_weights,
                &ForestParams {
                    n_estimators,
                    max_depth,
                    feature_subsample: None,
                    bootstrap: true,
                    seed: derive_indexed_seed(seed, ci as u64),
                },
            )?),
            ModelKind::Boosted => Model::Boosted(train_boosted(
                &x_train,
                &y_train,
                class_weights,
                &BoostedParams {
                    n_estimators,
                    max_depth,
                    ..BoostedParams::default()
                },
            )?),
            ModelKind::Logistic => unreachable!(),
        };
        let scores: Vec<f64> = (0..x_val.n_rows())
            .map(|i| model.proba_row(x_val.row(i)))
            .collect();
        errors.push(1.0 - auc_roc(&scores, &y_val)?);
    }

    let best = errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let chosen = configs
        .iter()
        .zip(&errors)
        .find(|(_, &e)| e <= best + 0.005)
        .map(|(&c, _)| c)
        .unwrap();
    Ok(chosen)
}

fn stratified_holdout(y: &[u8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::config(format!(
            "validation_fraction {fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::config(
                "grid sweep needs at least 2 members per class",
            ));
        }
        for j in (1..members.len()).rev() {
            let k = rng.random_range(0..=j);
            members.swap(j, k);
        }
        let n_val = ((members.len() as f64 * fraction).round() as usize)
            .clamp(1, members.len() - 1);
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::logistic::synthetic_matrix;

    #[test]
    fn holdout_is_disjoint_and_stratified() {
        let y: Vec<u8> = (0..40).map(|i| (i % 4 == 0) as u8).collect();
        let (train, val) = stratified_holdout(&y, 0.25, 7).unwrap();
        assert_eq!(train.len() + val.len(), 40);
        for i in &val {
            assert!(!train.contains(i));
        }
        let val_pos = val.iter().filter(|&&i| y[i] == 1).count();
        assert!(val_pos >= 2 && val_pos <= 4, "val_pos {val_pos}");
    }

    #[test]
    fn sweep_prefers_smallest_adequate_config() {
        // trivially separable data: the smallest config already wins
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let x = synthetic_matrix(&refs);
        let y: Vec<u8> = (0..60).map(|i| (i >= 30) as u8).collect();
        let spec = GridSpec {
            n_estimators: vec![10, 50],
            max_depth: vec![2, 4],
            validation_fraction: 0.3,
        };
        let (n, d) = sweep_tree_hyperparams(
            &x,
            &y,
            &ClassWeights::unit(),
            ModelKind::Boosted,
            &spec,
            3,
        )
        .unwrap();
        assert_eq!((n, d), (10, 2));
    }
}
