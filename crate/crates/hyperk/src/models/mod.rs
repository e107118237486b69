//! Three from-scratch classifiers behind one scoring surface: logistic
//! regression, random forest, gradient-boosted trees.

pub mod boosted;
pub mod logistic;
pub mod tree;
mod forest;
mod tuning;

pub use boosted::{train_boosted, BoostedModel, BoostedParams};
pub use forest::{train_forest, ForestModel, ForestParams};
pub use logistic::{sigmoid, train_logistic, LogisticModel, LrSchedule};
pub use tree::{Node, Tree};
pub use tuning::{sweep_tree_hyperparams, GridSpec};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

/// Inverse-prevalence class weights: `w_c = n_total / (2 * n_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weight_pos: f64,
    pub weight_neg: f64,
}

impl ClassWeights {
    pub fn balanced(y: &[u8]) -> Result<ClassWeights> {
        let n_pos = y.iter().filter(|&&v| v == 1).count();
        let n_neg = y.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::config(
                "class weights need both classes present",
            ));
        }
        let n = y.len() as f64;
        Ok(ClassWeights {
            weight_pos: n / (2.0 * n_pos as f64),
            weight_neg: n / (2.0 * n_neg as f64),
        })
    }

    pub fn unit() -> ClassWeights {
        ClassWeights {
            weight_pos: 1.0,
            weight_neg: 1.0,
        }
    }

    pub fn of(&self, y: u8) -> f64 {
        if y == 1 {
            self.weight_pos
        } else {
            self.weight_neg
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Forest,
    Boosted,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logistic, ModelKind::Forest, ModelKind::Boosted];

    pub fn token(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Forest => "forest",
            ModelKind::Boosted => "boosted",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        Self::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::config(format!("unknown model kind {s:?}")))
    }
}

/// Space a model's margin lives in; attribution records it to prevent
/// cross-space comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSpace {
    LogOdds,
    Probability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Boosted(BoostedModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Logistic(_) => ModelKind::Logistic,
            Model::Forest(_) => ModelKind::Forest,
            Model::Boosted(_) => ModelKind::Boosted,
        }
    }

    /// The space `margin_row` reports in: log-odds for logistic and
    /// boosted models, probability for the forest.
    pub fn output_space(&self) -> OutputSpace {
        match self {
            Model::Forest(_) => OutputSpace::Probability,
            _ => OutputSpace::LogOdds,
        }
    }

    pub fn margin_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.margin_row(row),
            Model::Forest(m) => m.proba_row(row),
            Model::Boosted(m) => m.margin_row(row),
        }
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.proba_row(row),
            Model::Forest(m) => m.proba_row(row),
            Model::Boosted(m) => m.proba_row(row),
        }
    }
}

/// Score every row of a column-aligned matrix.
pub fn predict_proba(model: &Model, x: &FeatureMatrix, n_features_expected: usize) -> Result<Vec<f64>> {
    if x.n_features() != n_features_expected {
        return Err(Error::config(format!(
            "predict_proba: matrix has {} features, model expects {n_features_expected}",
            x.n_features()
        )));
    }
    let out: Vec<f64> = (0..x.n_rows()).map(|i| model.proba_row(x.row(i))).collect();
    debug_assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));
    Ok(out)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk model: the model plus everything needed to refuse
/// mismatched inputs (feature names, config hash) and to attribute the
/// linear model (training-background means in model space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub feature_names: Vec<String>,
    /// Mean of each feature over the training rows, in model space.
    pub background_means: Vec<f64>,
    pub model: Model,
}

impl SavedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<SavedModel> {
        let saved: SavedModel = serde_json::from_str(s)?;
        if saved.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::config(format!(
                "unsupported model format version {}",
                saved.format_version
            )));
        }
        Ok(saved)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<SavedModel> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
