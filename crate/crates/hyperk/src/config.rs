//! Run configuration: one strict JSON file drives the whole pipeline.
//! Unknown keys are rejected; a SHA-256 hash of the canonical form is
//! stamped into every output artifact.

use crate::clinical::Scenario;
use crate::error::{Error, Result};
use crate::ingest::{SchemaConfig, SynthConfig};
use crate::models::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSelection {
    Case1,
    Case2,
    #[default]
    Both,
}

impl ScenarioSelection {
    pub fn parse(s: &str) -> Result<ScenarioSelection> {
        match s {
            "case1" => Ok(ScenarioSelection::Case1),
            "case2" => Ok(ScenarioSelection::Case2),
            "both" => Ok(ScenarioSelection::Both),
            other => Err(Error::config(format!(
                "unknown scenario selection {other:?}"
            ))),
        }
    }

    pub fn scenarios(self) -> Vec<Scenario> {
        match self {
            ScenarioSelection::Case1 => vec![Scenario::Case1],
            ScenarioSelection::Case2 => vec![Scenario::Case2],
            ScenarioSelection::Both => vec![Scenario::Case1, Scenario::Case2],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticConfig {
    pub l2_lambda: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2_lambda: 1.0,
            max_epochs: 400,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 200,
            max_depth: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostedConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_leaf_lambda: f64,
}

impl Default for BoostedConfig {
    fn default() -> Self {
        BoostedConfig {
            n_estimators: 150,
            max_depth: 4,
            learning_rate: 0.15,
            l2_leaf_lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfigs {
    pub logistic: LogisticConfig,
    pub forest: ForestConfig,
    pub boosted: BoostedConfig,
    /// When set, sweep tree hyperparameters on the first repeat's training
    /// split and reuse the chosen configuration everywhere.
    pub grid_search: bool,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSettings {
    pub top_k: usize,
    /// Cap on attributed test rows per model (fixed-seed subsample);
    /// `None` attributes every test row.
    pub max_rows: Option<usize>,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            top_k: 10,
            max_rows: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub scenario: ScenarioSelection,
    /// Include the day-1 AKI stage feature.
    pub include_aki_stage: bool,
    /// Also evaluate the toggled AKI-stage variant.
    pub ablation_aki_stage: bool,
    pub master_seed: u64,
    pub n_repeats: usize,
    pub knn_k: usize,
    pub models: ModelConfigs,
    pub explain: ExplainSettings,
    pub synth: SynthConfig,
    pub schema: SchemaConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            scenario: ScenarioSelection::Both,
            include_aki_stage: true,
            ablation_aki_stage: false,
            master_seed: 42,
            n_repeats: 4,
            knn_k: 3,
            models: ModelConfigs::default(),
            explain: ExplainSettings::default(),
            synth: SynthConfig::default(),
            schema: SchemaConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_repeats < 1 {
            return Err(Error::config("n_repeats must be >= 1"));
        }
        if self.knn_k < 1 {
            return Err(Error::config("knn_k must be >= 1"));
        }
        if self.explain.top_k < 1 {
            return Err(Error::config("explain.top_k must be >= 1"));
        }
        if self.explain.max_rows == Some(0) {
            return Err(Error::config("explain.max_rows must be >= 1 when set"));
        }
        self.synth.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex-encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn scenarios(&self) -> Vec<Scenario> {
        self.scenario.scenarios()
    }

    /// AKI-stage feature variants to evaluate.
    pub fn aki_variants(&self) -> Vec<bool> {
        if self.ablation_aki_stage {
            vec![self.include_aki_stage, !self.include_aki_stage]
        } else {
            vec![self.include_aki_stage]
        }
    }
}
