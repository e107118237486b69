//! Evaluation: stratified shuffle splits, lead-time test subsetting, AUC
//! with confidence intervals, and the scenario x model x lead-window
//! result table.

mod auc;
mod bootstrap;
mod matrix;
mod splits;

pub use auc::{auc_roc, roc_curve};
pub use bootstrap::{bootstrap_auc_interval, percentile, split_percentile_interval};
pub use matrix::{evaluate_matrix, CellScores, EvalOutput};
pub use splits::{make_splits, SplitPlan, TRAIN_FRACTION};

use crate::clinical::Scenario;
use crate::models::ModelKind;
use serde::{Deserialize, Serialize};

pub const LEAD_WINDOWS: [i64; 4] = [1, 2, 3, 4];
pub const MAX_ONSET_DAY: i64 = 14;

/// Lead-time test subset: positives restricted to onset days
/// `[n_start_day, 14]`, negatives always retained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeadTimeSubset {
    pub n_start_day: i64,
    pub rows: Vec<usize>,
}

pub fn lead_time_subset(
    test_rows: &[usize],
    y: &[u8],
    onset_day: &[Option<i64>],
    n_start_day: i64,
) -> LeadTimeSubset {
    let rows = test_rows
        .iter()
        .copied()
        .filter(|&i| {
            if y[i] == 0 {
                return true;
            }
            match onset_day[i] {
                Some(d) => d >= n_start_day && d <= MAX_ONSET_DAY,
                None => false,
            }
        })
        .collect();
    LeadTimeSubset { n_start_day, rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub model_kind: ModelKind,
    pub aki_stage_included: bool,
    /// Lead window start day n (test positives with onset day n..=14).
    pub lead_window: i64,
    /// Mean AUC over splits; `None` marks a flagged degenerate subset.
    pub auc_mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Pooled across repeats.
    pub n_test: usize,
    pub n_pos: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "scenario,model,aki_stage_included,lead_window,auc_mean,ci_low,ci_high,n_test,n_pos\n",
        );
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.scenario.token(),
                r.model_kind.token(),
                r.aki_stage_included,
                r.lead_window,
                fmt(r.auc_mean),
                fmt(r.ci_low),
                fmt(r.ci_high),
                r.n_test,
                r.n_pos
            ));
        }
        out
    }

    /// Text table grouped by lead window, one line per model x scenario.
    pub fn format_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Test window   Model      Scenario   AKI-feat   AUC (95% CI)          n_test  n_pos\n");
        out.push_str("--------------------------------------------------------------------------------\n");
        for r in &self.rows {
            let auc = match (r.auc_mean, r.ci_low, r.ci_high) {
                (Some(a), Some(lo), Some(hi)) => format!("{a:.2} ({lo:.2}-{hi:.2})"),
                _ => "n/a (no positives)".to_string(),
            };
            let ordinal = match r.lead_window {
                1 => "1st".to_string(),
                2 => "2nd".to_string(),
                3 => "3rd".to_string(),
                n => format!("{n}th"),
            };
            out.push_str(&format!(
                "{:<13} {:<10} {:<10} {:<10} {:<21} {:>6}  {:>5}\n",
                format!("{ordinal}~14th"),
                r.model_kind.token(),
                r.scenario.token(),
                if r.aki_stage_included { "with" } else { "without" },
                auc,
                r.n_test,
                r.n_pos
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lead_subsets_filter_positives_only() {
        let y = [1, 1, 0, 0, 1];
        let onset = [Some(1), Some(5), None, None, Some(3)];
        let test_rows = [0usize, 1, 2, 3, 4];
        let s1 = lead_time_subset(&test_rows, &y, &onset, 1);
        assert_eq!(s1.rows, vec![0, 1, 2, 3, 4]);
        let s2 = lead_time_subset(&test_rows, &y, &onset, 2);
        assert_eq!(s2.rows, vec![1, 2, 3, 4]);
        let s4 = lead_time_subset(&test_rows, &y, &onset, 4);
        assert_eq!(s4.rows, vec![1, 2, 3]);
    }

    #[test]
    fn lead_subsets_are_nested() {
        let y = [1, 0, 1, 0, 1, 1];
        let onset = [Some(2), None, Some(4), None, Some(14), Some(1)];
        let rows = [0usize, 1, 2, 3, 4, 5];
        let mut prev: Option<Vec<usize>> = None;
        for n in LEAD_WINDOWS {
            let s = lead_time_subset(&rows, &y, &onset, n);
            if let Some(p) = prev {
                for i in &s.rows {
                    assert!(p.contains(i), "n={n} member {i} not in n-1 subset");
                }
            }
            prev = Some(s.rows);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let table = ResultTable {
            rows: vec![ResultRow {
                scenario: Scenario::Case2,
                model_kind: ModelKind::Boosted,
                aki_stage_included: true,
                lead_window: 1,
                auc_mean: Some(0.85),
                ci_low: Some(0.84),
                ci_high: Some(0.86),
                n_test: 400,
                n_pos: 40,
            }],
        };
        let csv = table.to_csv_string();
        assert!(csv.starts_with("scenario,model"));
        assert!(csv.contains("case2,boosted,true,1,0.85"));
        let text = table.format_text();
        assert!(text.contains("1st~14th"));
    }
}
