//! Per-prediction Shapley attributions.
//!
//! Tree ensembles get the exact polynomial-time path algorithm
//! (`shap_tree`); the linear model gets its closed form (`shap_linear`);
//! `shap_brute_force` enumerates feature subsets under the same
//! cover-descent conditioning and exists to check the fast path. Forest
//! attributions live in probability space (leaves are probabilities),
//! boosted in log-odds; every attribution records its space.

mod brute;
mod linear;
mod tree_shap;

pub use brute::{expected_value_conditioned, shap_brute_force, MAX_BRUTE_FEATURES};
pub use linear::shap_linear;
pub use tree_shap::{shap_tree, tree_shap_single};

use crate::error::{Error, Result};
use crate::models::OutputSpace;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub patient_id: String,
    /// Expected model output over the training background.
    pub base_value: f64,
    /// Per-feature contributions, aligned to the feature dictionary.
    pub phi: Vec<f64>,
    pub output_space: OutputSpace,
}

impl Attribution {
    /// |base + sum(phi) - margin|; local accuracy demands < 1e-6.
    pub fn local_accuracy_residual(&self, margin: f64) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - margin).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub feature_name: String,
    pub mean_abs_phi: f64,
    /// Signed mean, the direction indicator for the ranking table.
    pub mean_phi: f64,
}

/// Features ranked by mean |phi|, descending; always full length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRanking {
    pub entries: Vec<SummaryEntry>,
}

impl SummaryRanking {
    pub fn top_k(&self, k: usize) -> &[SummaryEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn position_of(&self, feature_name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.feature_name == feature_name)
    }
}

/// Aggregate attributions into a ranking (mean |phi| per feature).
pub fn summarize(attributions: &[Attribution], feature_names: &[String]) -> Result<SummaryRanking> {
    if attributions.is_empty() {
        return Err(Error::config("summarize: no attributions"));
    }
    let p = feature_names.len();
    for a in attributions {
        if a.phi.len() != p {
            return Err(Error::config(format!(
                "summarize: attribution has {} features, expected {p}",
                a.phi.len()
            )));
        }
    }
    let n = attributions.len() as f64;
    let mut entries: Vec<(usize, SummaryEntry)> = (0..p)
        .map(|j| {
            let abs_sum: f64 = attributions.iter().map(|a| a.phi[j].abs()).sum();
            let sum: f64 = attributions.iter().map(|a| a.phi[j]).sum();
            (
                j,
                SummaryEntry {
                    feature_name: feature_names[j].clone(),
                    mean_abs_phi: abs_sum / n,
                    mean_phi: sum / n,
                },
            )
        })
        .collect();
    entries.sort_by(|(ja, a), (jb, b)| {
        b.mean_abs_phi
            .partial_cmp(&a.mean_abs_phi)
            .unwrap()
            .then(ja.cmp(jb))
    });
    Ok(SummaryRanking {
        entries: entries.into_iter().map(|(_, e)| e).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attribution(phi: Vec<f64>) -> Attribution {
        Attribution {
            patient_id: "p".into(),
            base_value: 0.0,
            phi,
            output_space: OutputSpace::LogOdds,
        }
    }

    #[test]
    fn single_attribution_ranks_by_abs_phi() {
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let ranking = summarize(&[attribution(vec![0.1, -0.9, 0.5])], &names).unwrap();
        let order: Vec<&str> = ranking.entries.iter().map(|e| e.feature_name.as_str()).collect();
        assert_eq!(order, vec!["b", "c", "a"]);
        assert_eq!(ranking.entries.len(), 3);
    }

    #[test]
    fn opposite_signs_do_not_cancel() {
        let names = vec!["a".to_string(), "b".to_string()];
        let ranking = summarize(
            &[attribution(vec![0.7, 0.1]), attribution(vec![-0.7, 0.1])],
            &names,
        )
        .unwrap();
        assert_eq!(ranking.entries[0].feature_name, "a");
        assert_eq!(ranking.entries[0].mean_abs_phi, 0.7);
        assert_eq!(ranking.entries[0].mean_phi, 0.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summarize(&[], &[]).is_err());
    }
}
