//! CLI subcommand implementations: synth, run, explain, validate-config.
//!
//! Every artifact is stamped with (config hash, master seed, tool
//! version) — CSVs via a leading `#` comment line, JSON via fields — and
//! written atomically (temp file + rename), so a failed stage never
//! corrupts earlier outputs. Two runs with the same config and seed
//! produce byte-identical result tables.

use crate::clinical::{compute_stage_series, Scenario};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_matrix, roc_curve, EvalOutput};
use crate::explain::{shap_brute_force, shap_linear, shap_tree, summarize, Attribution};
use crate::features::FeatureMatrix;
use crate::ingest::{generate_synthetic, load_event_store, write_event_store, EventStore};
use crate::models::{Model, ModelKind, SavedModel, MODEL_FORMAT_VERSION};
use crate::pipeline::FittedSplit;
use crate::seed::derive_seed;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

pub const LOCAL_ACCURACY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactStamp {
    pub config_hash: String,
    pub master_seed: u64,
    pub tool_version: String,
}

impl ArtifactStamp {
    pub fn of(config: &RunConfig) -> ArtifactStamp {
        ArtifactStamp {
            config_hash: config.hash(),
            master_seed: config.master_seed,
            tool_version: crate::VERSION.to_string(),
        }
    }

    fn comment_line(&self) -> String {
        format!(
            "# config_hash={} master_seed={} tool_version={}\n",
            self.config_hash, self.master_seed, self.tool_version
        )
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_stamped_csv(path: &Path, stamp: &ArtifactStamp, body: &str) -> Result<()> {
    let mut content = stamp.comment_line();
    content.push_str(body);
    write_atomic(path, content.as_bytes())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

struct StageTimer {
    lines: Vec<String>,
}

impl StageTimer {
    fn new() -> StageTimer {
        StageTimer { lines: Vec::new() }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| with_stage(stage, e))?;
        let ms = start.elapsed().as_millis();
        log::info!("stage {stage} finished in {ms} ms");
        self.lines.push(format!("stage={stage} ms={ms}"));
        Ok(out)
    }
}

/// Prefix the failing stage's name while preserving the error class (and
/// with it the exit code).
fn with_stage(stage: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("stage {stage}: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("stage {stage}: {m}")),
        other => Error::Data(format!("stage {stage}: {other}")),
    }
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Serialize)]
struct SynthManifest {
    config_hash: String,
    master_seed: u64,
    tool_version: String,
    synth_seed: u64,
    n_patients: usize,
    requested_prevalence: f64,
    rows_labs: usize,
    rows_meds: usize,
    rows_fluids: usize,
    rows_urine: usize,
    rows_dialysis: usize,
    case2_included: usize,
    case2_positives: usize,
    case1_included: usize,
    case1_positives: usize,
}

/// Generate the synthetic dataset into `input_dir` plus a manifest with
/// labeled-positive counts (computed through the clinical module).
pub fn cmd_synth(config: &RunConfig) -> Result<()> {
    config.validate()?;
    let stamp = ArtifactStamp::of(config);
    let synth_seed = derive_seed(config.master_seed, "synth");
    let store = generate_synthetic(&config.synth, synth_seed)?;
    std::fs::create_dir_all(&config.input_dir)?;
    write_event_store(&store, &config.input_dir)?;

    let case2 = crate::clinical::build_cohort(&store, Scenario::Case2)?;
    let case1 = crate::clinical::build_cohort(&store, Scenario::Case1)?;
    let (rows_labs, rows_meds, rows_fluids, rows_urine, rows_dialysis) = store.row_counts();
    let manifest = SynthManifest {
        config_hash: stamp.config_hash.clone(),
        master_seed: config.master_seed,
        tool_version: stamp.tool_version.clone(),
        synth_seed,
        n_patients: store.n_patients(),
        requested_prevalence: config.synth.prevalence,
        rows_labs,
        rows_meds,
        rows_fluids,
        rows_urine,
        rows_dialysis,
        case2_included: case2.n_included(),
        case2_positives: case2.n_positive(),
        case1_included: case1.n_included(),
        case1_positives: case1.n_positive(),
    };
    write_json(&config.input_dir.join("manifest.json"), &manifest)?;
    log::info!(
        "synthesized {} patients ({} case2 positives) into {}",
        store.n_patients(),
        manifest.case2_positives,
        config.input_dir.display()
    );
    Ok(())
}

// ------------------------------------------------------------------ run

fn scenario_dir_name(scenario: Scenario, include_aki: bool, primary_aki: bool) -> String {
    if include_aki == primary_aki {
        scenario.token().to_string()
    } else {
        format!("{}_ablation", scenario.token())
    }
}

fn cohort_csv(prep_cohort: &crate::clinical::CohortTable) -> String {
    let mut out = String::from(
        "scenario,patient_id,included,exclusion_reason,hyperkalemic,onset_time,onset_day,aki_onset_time\n",
    );
    for row in &prep_cohort.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            prep_cohort.scenario.token(),
            row.patient_id,
            row.included,
            row.exclusion_reason.map(|r| r.token()).unwrap_or(""),
            row.label.hyperkalemic,
            row.label.onset_time.map(|t| t.to_string()).unwrap_or_default(),
            row.label.onset_day.map(|d| d.to_string()).unwrap_or_default(),
            row.aki_onset_time.map(|t| t.to_string()).unwrap_or_default(),
        );
    }
    out
}

fn stage_series_csv(store: &EventStore) -> Result<String> {
    let mut out = String::from("patient_id,time,stage\n");
    for idx in 0..store.n_patients() {
        let series = compute_stage_series(store, idx)?;
        for (t, s) in series.steps() {
            let _ = writeln!(out, "{},{},{}", store.patient(idx).patient_id, t, s.as_u8());
        }
    }
    Ok(out)
}

fn features_csv(matrix: &FeatureMatrix, raw: bool) -> String {
    let mut out = String::from("patient_id");
    for name in matrix.dict.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..matrix.n_rows() {
        out.push_str(&matrix.patient_ids[i]);
        for j in 0..matrix.n_features() {
            out.push(',');
            if raw && matrix.is_missing(i, j) && matrix.get(i, j).is_nan() {
                // empty cell marks missing in the raw export
            } else {
                let _ = write!(out, "{}", matrix.get(i, j));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct FeaturesMeta<'a> {
    config_hash: &'a str,
    master_seed: u64,
    tool_version: &'a str,
    repeat_index: usize,
    n_rows: usize,
    features: Vec<FeatureMetaEntry<'a>>,
    normalization: &'a crate::features::NormParams,
}

#[derive(Serialize)]
struct FeatureMetaEntry<'a> {
    name: &'a str,
    kind: crate::features::FeatureKind,
    unit: &'a str,
    n_missing_raw: usize,
}

fn attribution_csv(attributions: &[Attribution], names: &[&str]) -> String {
    let mut out = String::from("patient_id,output_space,base_value");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for a in attributions {
        let space = match a.output_space {
            crate::models::OutputSpace::LogOdds => "log_odds",
            crate::models::OutputSpace::Probability => "probability",
        };
        let _ = write!(out, "{},{},{}", a.patient_id, space, a.base_value);
        for phi in &a.phi {
            let _ = write!(out, ",{phi}");
        }
        out.push('\n');
    }
    out
}

/// Attribute the split's test rows (optionally capped) under one model.
fn attribute_rows(
    model: &Model,
    fitted: &FittedSplit,
    rows: &[usize],
    background_means: &[f64],
) -> Result<Vec<Attribution>> {
    let attributions: Vec<Attribution> = rows
        .par_iter()
        .map(|&i| {
            let row = fitted.matrix.row(i);
            let id = fitted.matrix.patient_ids[i].as_str();
            let attribution = match model {
                Model::Logistic(m) => shap_linear(m, id, row, background_means)?,
                _ => shap_tree(model, id, row)?,
            };
            let residual = attribution.local_accuracy_residual(model.margin_row(row));
            if residual >= LOCAL_ACCURACY_TOL {
                return Err(Error::numeric(format!(
                    "attribution for {id} violates local accuracy: residual {residual:e}"
                )));
            }
            Ok(attribution)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(attributions)
}

/// Full pipeline: cohort, features, models, attributions, result table.
pub fn cmd_run(config: &RunConfig) -> Result<EvalOutput> {
    config.validate()?;
    let stamp = ArtifactStamp::of(config);
    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir)?;
    let mut timer = StageTimer::new();

    let store = timer.time("load", || {
        load_event_store(&config.input_dir, &config.schema)
    })?;
    let output = timer.time("evaluate", || evaluate_matrix(&store, config))?;

    timer.time("stage_series", || {
        write_stamped_csv(
            &out_dir.join("stage_series.csv"),
            &stamp,
            &stage_series_csv(&store)?,
        )
    })?;

    for eval in &output.scenario_evals {
        let dir = out_dir.join(scenario_dir_name(
            eval.prep.scenario,
            eval.prep.include_aki_stage,
            config.include_aki_stage,
        ));
        let scenario_label = dir.file_name().unwrap().to_string_lossy().to_string();
        timer.time(&format!("artifacts/{scenario_label}"), || {
            write_stamped_csv(&dir.join("cohort.csv"), &stamp, &cohort_csv(&eval.prep.cohort))?;
            write_stamped_csv(
                &dir.join("features_raw.csv"),
                &stamp,
                &features_csv(&eval.prep.raw, true),
            )?;

            let fitted0 = &eval.fitted[0];
            write_stamped_csv(
                &dir.join("features_model.csv"),
                &stamp,
                &features_csv(&fitted0.matrix, false),
            )?;
            let missing = eval.prep.raw.n_missing_per_feature();
            let meta = FeaturesMeta {
                config_hash: &stamp.config_hash,
                master_seed: config.master_seed,
                tool_version: &stamp.tool_version,
                repeat_index: 0,
                n_rows: fitted0.matrix.n_rows(),
                features: fitted0
                    .matrix
                    .dict
                    .defs()
                    .iter()
                    .zip(&missing)
                    .map(|(def, &n_missing_raw)| FeatureMetaEntry {
                        name: &def.name,
                        kind: def.kind,
                        unit: &def.unit,
                        n_missing_raw,
                    })
                    .collect(),
                normalization: &fitted0.norm,
            };
            write_json(&dir.join("features_meta.json"), &meta)?;

            let names = fitted0.matrix.dict.names();
            let feature_names: Vec<String> =
                names.iter().map(|s| s.to_string()).collect();
            let attributed_rows: Vec<usize> = match config.explain.max_rows {
                Some(cap) => fitted0.plan.test_rows.iter().copied().take(cap).collect(),
                None => fitted0.plan.test_rows.clone(),
            };
            for (kind, model) in &fitted0.models {
                let saved = SavedModel {
                    format_version: MODEL_FORMAT_VERSION,
                    tool_version: stamp.tool_version.clone(),
                    config_hash: stamp.config_hash.clone(),
                    master_seed: config.master_seed,
                    feature_names: feature_names.clone(),
                    background_means: fitted0.background_means.clone(),
                    model: model.clone(),
                };
                let model_path = dir.join(format!("model_{}.json", kind.token()));
                write_atomic(&model_path, saved.to_json()?.as_bytes())?;

                let attributions =
                    attribute_rows(model, fitted0, &attributed_rows, &fitted0.background_means)?;
                write_stamped_csv(
                    &dir.join(format!("attributions_{}.csv", kind.token())),
                    &stamp,
                    &attribution_csv(&attributions, &names),
                )?;
                let ranking = summarize(&attributions, &feature_names)?;
                let mut summary_csv =
                    String::from("rank,feature,mean_abs_phi,mean_phi\n");
                for (rank, entry) in ranking.entries.iter().enumerate() {
                    let _ = writeln!(
                        summary_csv,
                        "{},{},{},{}",
                        rank + 1,
                        entry.feature_name,
                        entry.mean_abs_phi,
                        entry.mean_phi
                    );
                }
                write_stamped_csv(
                    &dir.join(format!("shap_summary_{}.csv", kind.token())),
                    &stamp,
                    &summary_csv,
                )?;
                #[derive(Serialize)]
                struct SummaryJson<'a> {
                    config_hash: &'a str,
                    master_seed: u64,
                    tool_version: &'a str,
                    model_kind: ModelKind,
                    top_k: Vec<&'a crate::explain::SummaryEntry>,
                }
                write_json(
                    &dir.join(format!("shap_summary_{}.json", kind.token())),
                    &SummaryJson {
                        config_hash: &stamp.config_hash,
                        master_seed: config.master_seed,
                        tool_version: &stamp.tool_version,
                        model_kind: *kind,
                        top_k: ranking.top_k(config.explain.top_k).iter().collect(),
                    },
                )?;
            }
            Ok(())
        })?;
    }

    timer.time("results", || {
        write_stamped_csv(
            &out_dir.join("results.csv"),
            &stamp,
            &output.table.to_csv_string(),
        )?;
        let mut results_txt = stamp.comment_line();
        results_txt.push_str(&output.table.format_text());
        write_atomic(&out_dir.join("results.txt"), results_txt.as_bytes())?;
        for cell in &output.cells {
            let pos = cell.pooled_labels.iter().filter(|&&v| v == 1).count();
            if pos == 0 || pos == cell.pooled_labels.len() {
                continue;
            }
            let points = roc_curve(&cell.pooled_scores, &cell.pooled_labels)?;
            let mut body = String::from("fpr,tpr,threshold\n");
            for (fpr, tpr, threshold) in points {
                let _ = writeln!(body, "{fpr},{tpr},{threshold}");
            }
            let name = format!(
                "roc_{}_aki-{}_{}_n{}.csv",
                cell.scenario.token(),
                if cell.aki_stage_included { "on" } else { "off" },
                cell.model_kind.token(),
                cell.lead_window
            );
            write_stamped_csv(&out_dir.join("roc").join(name), &stamp, &body)?;
        }
        Ok(())
    })?;

    #[derive(Serialize)]
    struct RunManifest<'a> {
        config_hash: &'a str,
        master_seed: u64,
        tool_version: &'a str,
        n_patients: usize,
        n_result_rows: usize,
    }
    write_json(
        &out_dir.join("manifest.json"),
        &RunManifest {
            config_hash: &stamp.config_hash,
            master_seed: config.master_seed,
            tool_version: &stamp.tool_version,
            n_patients: store.n_patients(),
            n_result_rows: output.table.rows.len(),
        },
    )?;
    write_atomic(
        &out_dir.join("run.log"),
        (stamp.comment_line() + &timer.lines.join("\n") + "\n").as_bytes(),
    )?;
    Ok(output)
}

// -------------------------------------------------------------- explain

/// Check a row's feature header against the model's dictionary.
fn read_features_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut names = Vec::new();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if names.is_empty() {
            names = fields[1..].iter().map(|s| s.to_string()).collect();
            continue;
        }
        ids.push(fields[0].to_string());
        let row: Vec<f64> = fields[1..]
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| {
                    Error::data(format!(
                        "{}:{}: bad feature value {s:?}",
                        path.display(),
                        line_no + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((ids, names, rows))
}

/// Attribute saved-model predictions for selected rows of a persisted
/// model-space feature matrix; writes phi rows and a top-k summary.
pub fn cmd_explain(
    config: &RunConfig,
    model_path: &Path,
    features_path: &Path,
    patient_ids: Option<&[String]>,
    brute_check: bool,
) -> Result<()> {
    let stamp = ArtifactStamp::of(config);
    let saved = SavedModel::load(model_path)?;
    if saved.config_hash != stamp.config_hash {
        return Err(Error::config(format!(
            "config hash mismatch: model carries {}, current config is {}",
            saved.config_hash, stamp.config_hash
        )));
    }
    let (ids, names, rows) = read_features_csv(features_path)?;
    if names != saved.feature_names {
        return Err(Error::config(
            "feature dictionary mismatch between model and feature matrix",
        ));
    }

    if brute_check && names.len() > crate::explain::MAX_BRUTE_FEATURES {
        log::warn!(
            "brute-check skipped: {} features exceed the subset-enumeration cap of {}",
            names.len(),
            crate::explain::MAX_BRUTE_FEATURES
        );
    }
    let selected: Vec<usize> = match patient_ids {
        Some(wanted) => {
            let mut sel = Vec::new();
            for id in wanted {
                let idx = ids
                    .iter()
                    .position(|x| x == id)
                    .ok_or_else(|| Error::data(format!("patient {id:?} not in feature matrix")))?;
                sel.push(idx);
            }
            sel
        }
        None => (0..ids.len()).collect(),
    };

    let attributions: Vec<Attribution> = selected
        .par_iter()
        .map(|&i| {
            let attribution = match &saved.model {
                Model::Logistic(m) => shap_linear(m, &ids[i], &rows[i], &saved.background_means)?,
                model => shap_tree(model, &ids[i], &rows[i])?,
            };
            let residual =
                attribution.local_accuracy_residual(saved.model.margin_row(&rows[i]));
            if residual >= LOCAL_ACCURACY_TOL {
                return Err(Error::numeric(format!(
                    "attribution for {} violates local accuracy: residual {residual:e}",
                    ids[i]
                )));
            }
            if brute_check && names.len() <= crate::explain::MAX_BRUTE_FEATURES {
                if let Model::Logistic(_) = saved.model {
                } else {
                    let brute = shap_brute_force(&saved.model, &ids[i], &rows[i])?;
                    for (a, b) in attribution.phi.iter().zip(&brute.phi) {
                        if (a - b).abs() >= 1e-9 {
                            return Err(Error::numeric(format!(
                                "fast/brute attribution mismatch for {}: {a} vs {b}",
                                ids[i]
                            )));
                        }
                    }
                }
            }
            Ok(attribution)
        })
        .collect::<Result<Vec<_>>>()?;

    let out_dir = config.output_dir.join("explain");
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    write_stamped_csv(
        &out_dir.join("attributions.csv"),
        &stamp,
        &attribution_csv(&attributions, &name_refs),
    )?;
    let ranking = summarize(&attributions, &names)?;
    let mut summary_csv = String::from("rank,feature,mean_abs_phi,mean_phi\n");
    for (rank, entry) in ranking.entries.iter().take(config.explain.top_k).enumerate() {
        let _ = writeln!(
            summary_csv,
            "{},{},{},{}",
            rank + 1,
            entry.feature_name,
            entry.mean_abs_phi,
            entry.mean_phi
        );
    }
    write_stamped_csv(&out_dir.join("summary_topk.csv"), &stamp, &summary_csv)?;
    #[derive(Serialize)]
    struct RankingJson<'a> {
        config_hash: &'a str,
        master_seed: u64,
        tool_version: &'a str,
        model_kind: ModelKind,
        ranking: &'a crate::explain::SummaryRanking,
    }
    write_json(
        &out_dir.join("summary.json"),
        &RankingJson {
            config_hash: &stamp.config_hash,
            master_seed: config.master_seed,
            tool_version: &stamp.tool_version,
            model_kind: saved.model.kind(),
            ranking: &ranking,
        },
    )?;
    log::info!(
        "attributed {} rows with the {} model",
        attributions.len(),
        saved.model.kind().token()
    );
    Ok(())
}

/// Parse, validate, and report the config hash.
pub fn cmd_validate_config(path: &Path) -> Result<String> {
    let config = RunConfig::from_file(path)?;
    Ok(config.hash())
}
