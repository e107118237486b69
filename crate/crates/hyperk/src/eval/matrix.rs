//! The scenario x model x lead-window evaluation engine.
//!
//! Training always uses the full day-1..14 labels; lead-time windows only
//! filter the test side. Cells aggregate across repeats: the reported AUC
//! is the mean of per-split AUCs and the interval is a stratified
//! bootstrap of the pooled test scores (widened to the mean if needed, so
//! ci_low <= auc_mean <= ci_high always holds). Degenerate subsets are
//! flagged rather than dropped.

use super::{
    bootstrap_auc_interval, lead_time_subset, make_splits, ResultRow, ResultTable, LEAD_WINDOWS,
};
use crate::clinical::Scenario;
use crate::config::RunConfig;
use crate::error::Result;
use crate::eval::auc_roc;
use crate::ingest::EventStore;
use crate::models::ModelKind;
use crate::pipeline::{
    fit_split, prepare_scenario, tuned_model_configs, FittedSplit, PreparedScenario,
};
use crate::seed::derive_seed;
use rayon::prelude::*;

/// Pooled scores and per-split AUCs for one result cell.
#[derive(Debug, Clone)]
pub struct CellScores {
    pub scenario: Scenario,
    pub model_kind: ModelKind,
    pub aki_stage_included: bool,
    pub lead_window: i64,
    pub pooled_scores: Vec<f64>,
    pub pooled_labels: Vec<u8>,
    pub per_split_aucs: Vec<f64>,
}

/// One evaluated (scenario, AKI-variant) block with its fitted splits,
/// retained so the CLI can persist models and attributions without
/// retraining.
pub struct ScenarioEval {
    pub prep: PreparedScenario,
    pub fitted: Vec<FittedSplit>,
}

pub struct EvalOutput {
    pub table: ResultTable,
    pub cells: Vec<CellScores>,
    pub scenario_evals: Vec<ScenarioEval>,
}

pub fn evaluate_matrix(store: &EventStore, config: &RunConfig) -> Result<EvalOutput> {
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut scenario_evals = Vec::new();

    for scenario in config.scenarios() {
        for include_aki in config.aki_variants() {
            let prep = prepare_scenario(store, scenario, include_aki)?;
            let split_seed = derive_seed(
                config.master_seed,
                &format!("splits/{}/aki={include_aki}", scenario.token()),
            );
            let plans = make_splits(&prep.y, config.n_repeats, split_seed)?;
            let model_cfg = tuned_model_configs(&prep, &plans[0], config)?;

            let fitted: Vec<FittedSplit> = plans
                .par_iter()
                .map(|plan| fit_split(&prep, plan, &model_cfg, config.knn_k, config.master_seed))
                .collect::<Result<Vec<_>>>()?;

            for kind in ModelKind::ALL {
                for lead in LEAD_WINDOWS {
                    let mut pooled_scores = Vec::new();
                    let mut pooled_labels = Vec::new();
                    let mut per_split_aucs = Vec::new();
                    for split in &fitted {
                        let subset = lead_time_subset(
                            &split.plan.test_rows,
                            &prep.y,
                            &prep.onset_day,
                            lead,
                        );
                        let model = &split
                            .models
                            .iter()
                            .find(|(k, _)| *k == kind)
                            .expect("all kinds fitted")
                            .1;
                        let scores: Vec<f64> = subset
                            .rows
                            .iter()
                            .map(|&i| model.proba_row(split.matrix.row(i)))
                            .collect();
                        let labels: Vec<u8> = subset.rows.iter().map(|&i| prep.y[i]).collect();
                        let n_pos = labels.iter().filter(|&&v| v == 1).count();
                        if n_pos > 0 && n_pos < labels.len() {
                            per_split_aucs.push(auc_roc(&scores, &labels)?);
                        }
                        pooled_scores.extend(scores);
                        pooled_labels.extend(labels);
                    }

                    let auc_mean = if per_split_aucs.is_empty() {
                        None
                    } else {
                        Some(per_split_aucs.iter().sum::<f64>() / per_split_aucs.len() as f64)
                    };
                    let pooled_pos = pooled_labels.iter().filter(|&&v| v == 1).count();
                    let ci = if pooled_pos > 0 && pooled_pos < pooled_labels.len() {
                        let ci_seed = derive_seed(
                            config.master_seed,
                            &format!(
                                "bootstrap/{}/aki={include_aki}/{}/{lead}",
                                scenario.token(),
                                kind.token()
                            ),
                        );
                        Some(bootstrap_auc_interval(
                            &pooled_scores,
                            &pooled_labels,
                            1000,
                            0.95,
                            ci_seed,
                        )?)
                    } else {
                        None
                    };
                    let (ci_low, ci_high) = match (ci, auc_mean) {
                        (Some((lo, hi)), Some(mean)) => (Some(lo.min(mean)), Some(hi.max(mean))),
                        (Some((lo, hi)), None) => (Some(lo), Some(hi)),
                        (None, _) => (None, None),
                    };
                    if auc_mean.is_none() {
                        log::warn!(
                            "flagged cell with no scorable positives: {} {} lead {}",
                            scenario.token(),
                            kind.token(),
                            lead
                        );
                    }

                    rows.push(ResultRow {
                        scenario,
                        model_kind: kind,
                        aki_stage_included: include_aki,
                        lead_window: lead,
                        auc_mean,
                        ci_low,
                        ci_high,
                        n_test: pooled_labels.len(),
                        n_pos: pooled_pos,
                    });
                    cells.push(CellScores {
                        scenario,
                        model_kind: kind,
                        aki_stage_included: include_aki,
                        lead_window: lead,
                        pooled_scores,
                        pooled_labels,
                        per_split_aucs,
                    });
                }
            }

            scenario_evals.push(ScenarioEval { prep, fitted });
        }
    }

    rows.sort_by_key(|r| {
        (
            r.scenario.token(),
            r.aki_stage_included,
            r.model_kind,
            r.lead_window,
        )
    });
    Ok(EvalOutput {
        table: ResultTable { rows },
        cells,
        scenario_evals,
    })
}
