//! Scenario preparation and per-split fitting: the composition layer
//! between the clinical/feature modules and the evaluation matrix.

use crate::clinical::{build_cohort, CohortTable, Scenario};
use crate::config::{ModelConfigs, RunConfig};
use crate::error::Result;
use crate::eval::SplitPlan;
use crate::features::{
    extract_raw_features, impute_knn, normalize, provenance_hash, FeatureMatrix, NormParams,
};
use crate::ingest::EventStore;
use crate::models::{
    train_boosted, train_forest, train_logistic, BoostedParams, ClassWeights, ForestParams,
    LrSchedule, Model, ModelKind,
};
use crate::seed::derive_seed;

/// One scenario's cohort, labels, onset days, and raw feature matrix.
/// Row order follows the cohort's included rows.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub include_aki_stage: bool,
    pub cohort: CohortTable,
    pub y: Vec<u8>,
    pub onset_day: Vec<Option<i64>>,
    pub raw: FeatureMatrix,
}

pub fn prepare_scenario(
    store: &EventStore,
    scenario: Scenario,
    include_aki_stage: bool,
) -> Result<PreparedScenario> {
    let cohort = build_cohort(store, scenario)?;
    let raw = extract_raw_features(store, &cohort, include_aki_stage)?;
    let y: Vec<u8> = cohort
        .included()
        .map(|r| r.label.hyperkalemic as u8)
        .collect();
    let onset_day: Vec<Option<i64>> = cohort.included().map(|r| r.label.onset_day).collect();
    debug_assert_eq!(y.len(), raw.n_rows());
    Ok(PreparedScenario {
        scenario,
        include_aki_stage,
        cohort,
        y,
        onset_day,
        raw,
    })
}

/// Models and preprocessing fitted on one split's training rows.
#[derive(Debug, Clone)]
pub struct FittedSplit {
    pub plan: SplitPlan,
    /// Imputed and normalized matrix covering every cohort row.
    pub matrix: FeatureMatrix,
    pub norm: NormParams,
    pub class_weights: ClassWeights,
    pub models: Vec<(ModelKind, Model)>,
    /// Per-feature training means in model space (attribution background).
    pub background_means: Vec<f64>,
}

pub fn fit_split(
    prep: &PreparedScenario,
    plan: &SplitPlan,
    model_cfg: &ModelConfigs,
    knn_k: usize,
    master_seed: u64,
) -> Result<FittedSplit> {
    let imputed = impute_knn(&prep.raw, knn_k, &plan.train_rows)?;
    let (matrix, norm) = normalize(&imputed, &plan.train_rows)?;

    // leakage audit: fitted parameters must come from exactly these rows
    let train_ids: Vec<String> = plan
        .train_rows
        .iter()
        .map(|&i| matrix.patient_ids[i].clone())
        .collect();
    debug_assert_eq!(norm.provenance_hash, provenance_hash(&train_ids));

    let x_train = matrix.subset_rows(&plan.train_rows);
    let y_train: Vec<u8> = plan.train_rows.iter().map(|&i| prep.y[i]).collect();
    let class_weights = ClassWeights::balanced(&y_train)?;

    let fit_seed = derive_seed(
        master_seed,
        &format!(
            "fit/{}/aki={}/repeat={}",
            prep.scenario.token(),
            prep.include_aki_stage,
            plan.repeat_index
        ),
    );

    let logistic = train_logistic(
        &x_train,
        &y_train,
        &class_weights,
        model_cfg.logistic.l2_lambda,
        &LrSchedule::default(),
        model_cfg.logistic.max_epochs,
        model_cfg.logistic.tol,
    )?;
    let forest = train_forest(
        &x_train,
        &y_train,
        &class_weights,
        &ForestParams {
            n_estimators: model_cfg.forest.n_estimators,
            max_depth: model_cfg.forest.max_depth,
            feature_subsample: None,
            bootstrap: true,
            seed: fit_seed,
        },
    )?;
    let boosted = train_boosted(
        &x_train,
        &y_train,
        &class_weights,
        &BoostedParams {
            n_estimators: model_cfg.boosted.n_estimators,
            max_depth: model_cfg.boosted.max_depth,
            learning_rate: model_cfg.boosted.learning_rate,
            l2_leaf_lambda: model_cfg.boosted.l2_leaf_lambda,
        },
    )?;

    let p = matrix.n_features();
    let mut background_means = vec![0.0; p];
    for &i in &plan.train_rows {
        for (j, acc) in background_means.iter_mut().enumerate() {
            *acc += matrix.get(i, j);
        }
    }
    for acc in &mut background_means {
        *acc /= plan.train_rows.len() as f64;
    }

    Ok(FittedSplit {
        plan: plan.clone(),
        matrix,
        norm,
        class_weights,
        models: vec![
            (ModelKind::Logistic, Model::Logistic(logistic)),
            (ModelKind::Forest, Model::Forest(forest)),
            (ModelKind::Boosted, Model::Boosted(boosted)),
        ],
        background_means,
    })
}

/// Apply a grid sweep (when enabled) to refine tree-model configs, using
/// the given split's training rows.
pub fn tuned_model_configs(
    prep: &PreparedScenario,
    plan: &SplitPlan,
    config: &RunConfig,
) -> Result<ModelConfigs> {
    let mut model_cfg = config.models.clone();
    if !model_cfg.grid_search {
        return Ok(model_cfg);
    }
    let imputed = impute_knn(&prep.raw, config.knn_k, &plan.train_rows)?;
    let (matrix, _) = normalize(&imputed, &plan.train_rows)?;
    let x_train = matrix.subset_rows(&plan.train_rows);
    let y_train: Vec<u8> = plan.train_rows.iter().map(|&i| prep.y[i]).collect();
    let class_weights = ClassWeights::balanced(&y_train)?;
    let sweep_seed = derive_seed(
        config.master_seed,
        &format!("sweep/{}/aki={}", prep.scenario.token(), prep.include_aki_stage),
    );
    let (n_f, d_f) = crate::models::sweep_tree_hyperparams(
        &x_train,
        &y_train,
        &class_weights,
        ModelKind::Forest,
        &model_cfg.grid,
        sweep_seed,
    )?;
    model_cfg.forest.n_estimators = n_f;
    model_cfg.forest.max_depth = d_f;
    let (n_b, d_b) = crate::models::sweep_tree_hyperparams(
        &x_train,
        &y_train,
        &class_weights,
        ModelKind::Boosted,
        &model_cfg.grid,
        sweep_seed.wrapping_add(1),
    )?;
    model_cfg.boosted.n_estimators = n_b;
    model_cfg.boosted.max_depth = d_b;
    Ok(model_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::make_splits;
    use crate::ingest::{generate_synthetic, SynthConfig};

    fn small_store() -> EventStore {
        let cfg = SynthConfig {
            n_patients: 120,
            prevalence: 0.15,
            ..SynthConfig::default()
        };
        generate_synthetic(&cfg, 11).unwrap()
    }

    #[test]
    fn prepared_scenario_rows_align() {
        let store = small_store();
        let prep = prepare_scenario(&store, Scenario::Case2, true).unwrap();
        assert_eq!(prep.y.len(), prep.raw.n_rows());
        assert_eq!(prep.onset_day.len(), prep.raw.n_rows());
        // every positive has an onset day in 1..=14
        for (i, &label) in prep.y.iter().enumerate() {
            if label == 1 {
                let d = prep.onset_day[i].unwrap();
                assert!((1..=14).contains(&d));
            } else {
                assert!(prep.onset_day[i].is_none());
            }
        }
        // positives roughly match the planted prevalence
        let n_pos = prep.y.iter().filter(|&&v| v == 1).count();
        assert!(n_pos >= 14 && n_pos <= 22, "n_pos {n_pos}");
    }

    #[test]
    fn fitted_split_has_complete_normalized_matrix() {
        let store = small_store();
        let prep = prepare_scenario(&store, Scenario::Case2, true).unwrap();
        let plans = make_splits(&prep.y, 1, 3).unwrap();
        let fitted = fit_split(&prep, &plans[0], &ModelConfigs::default(), 3, 5).unwrap();
        for i in 0..fitted.matrix.n_rows() {
            for v in fitted.matrix.row(i) {
                assert!(v.is_finite());
            }
        }
        assert_eq!(fitted.models.len(), 3);
        // permuting test rows must not change fitted parameters
        let mut shuffled = plans[0].clone();
        shuffled.test_rows.reverse();
        let refit = fit_split(&prep, &shuffled, &ModelConfigs::default(), 3, 5).unwrap();
        assert_eq!(fitted.norm, refit.norm);
        assert_eq!(fitted.background_means, refit.background_means);
    }
}
