//! Scenario cohort construction with ordered exclusions.
//!
//! Inclusion: ages 18-90 (first ICU admission is assumed upstream: one
//! row per patient). Exclusions apply in fixed order and each excluded
//! row carries exactly one (the first matching) reason. Case 1 restricts
//! to patients with AKI onset within 7 days of admission and labels
//! hyperkalemia confirmed in the 7 days after AKI onset; Case 2 labels
//! hyperkalemia within 14 days of admission regardless of AKI.

use super::labeling::label_hyperkalemia;
use super::staging::compute_stage_series;
use super::OutcomeLabel;
use crate::error::{Error, Result};
use crate::ingest::{Analyte, EventStore, MedCategory};
use crate::time::{Timestamp, MINUTES_PER_HOUR};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Case1,
    Case2,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Scenario> {
        match s {
            "case1" => Ok(Scenario::Case1),
            "case2" => Ok(Scenario::Case2),
            other => Err(Error::config(format!("unknown scenario token {other:?}"))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Scenario::Case1 => "case1",
            Scenario::Case2 => "case2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    Age,
    Ckd5Esrd,
    EndOfLife,
    PeritonealDialysis,
    HemodialysisPrior,
    AdmissionHyperkalemia,
    /// Case 1 only: no AKI onset within 7 days of admission.
    NoAkiWithin7d,
}

impl ExclusionReason {
    pub fn token(self) -> &'static str {
        match self {
            ExclusionReason::Age => "age",
            ExclusionReason::Ckd5Esrd => "ckd5_esrd",
            ExclusionReason::EndOfLife => "end_of_life",
            ExclusionReason::PeritonealDialysis => "peritoneal_dialysis",
            ExclusionReason::HemodialysisPrior => "hemodialysis_prior",
            ExclusionReason::AdmissionHyperkalemia => "admission_hyperkalemia",
            ExclusionReason::NoAkiWithin7d => "no_aki_within_7d",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CohortRow {
    pub patient_idx: usize,
    pub patient_id: String,
    pub included: bool,
    pub exclusion_reason: Option<ExclusionReason>,
    pub label: OutcomeLabel,
    pub aki_onset_time: Option<Timestamp>,
}

#[derive(Debug, Clone)]
pub struct CohortTable {
    pub scenario: Scenario,
    pub rows: Vec<CohortRow>,
}

impl CohortTable {
    pub fn included(&self) -> impl Iterator<Item = &CohortRow> {
        self.rows.iter().filter(|r| r.included)
    }

    pub fn n_included(&self) -> usize {
        self.included().count()
    }

    pub fn n_positive(&self) -> usize {
        self.included().filter(|r| r.label.hyperkalemic).count()
    }
}

const ADMIT_K_LOOKBACK_MIN: i64 = 12 * MINUTES_PER_HOUR;
const ADMIT_K_LOOKAHEAD_MIN: i64 = MINUTES_PER_HOUR;

/// Build the cohort for one scenario.
pub fn build_cohort(store: &EventStore, scenario: Scenario) -> Result<CohortTable> {
    let mut rows = Vec::with_capacity(store.n_patients());
    for idx in 0..store.n_patients() {
        rows.push(build_row(store, scenario, idx)?);
    }
    let table = CohortTable { scenario, rows };
    debug_assert!(table
        .rows
        .iter()
        .all(|r| r.included == r.exclusion_reason.is_none()));
    Ok(table)
}

fn build_row(store: &EventStore, scenario: Scenario, idx: usize) -> Result<CohortRow> {
    let patient = store.patient(idx);
    let admit = patient.icu_admit_time;
    let events = store.events(idx);

    let excluded = |reason| CohortRow {
        patient_idx: idx,
        patient_id: patient.patient_id.clone(),
        included: false,
        exclusion_reason: Some(reason),
        label: OutcomeLabel::negative(&patient.patient_id),
        aki_onset_time: None,
    };

    if !(18.0..=90.0).contains(&patient.age) {
        return Ok(excluded(ExclusionReason::Age));
    }
    if patient.excl_ckd5_esrd {
        return Ok(excluded(ExclusionReason::Ckd5Esrd));
    }
    if patient.excl_eol_24h {
        return Ok(excluded(ExclusionReason::EndOfLife));
    }
    if patient.excl_peritoneal_dialysis {
        return Ok(excluded(ExclusionReason::PeritonealDialysis));
    }
    if patient.excl_hd_prior {
        return Ok(excluded(ExclusionReason::HemodialysisPrior));
    }

    let potassium = events.lab_series(Analyte::Potassium);
    let admit_window_lo = admit.add_minutes(-ADMIT_K_LOOKBACK_MIN);
    let admit_window_hi = admit.add_minutes(ADMIT_K_LOOKAHEAD_MIN);
    let admission_hyperk = potassium
        .iter()
        .any(|&(t, v)| v >= 6.0 && t >= admit_window_lo && t <= admit_window_hi);
    if admission_hyperk {
        return Ok(excluded(ExclusionReason::AdmissionHyperkalemia));
    }

    let stage_series = compute_stage_series(store, idx)?;
    let aki_onset = stage_series.first_nonzero_at_or_after(admit);
    let calcium_gluconate = events.med_times(MedCategory::CalciumGluconate);
    let horizon = admit.add_days(14);

    let (window_start, window_end, aki_onset_time) = match scenario {
        Scenario::Case2 => (admit, horizon, aki_onset),
        Scenario::Case1 => {
            let onset = match aki_onset {
                Some(t) if t <= admit.add_days(7) => t,
                _ => return Ok(excluded(ExclusionReason::NoAkiWithin7d)),
            };
            // (onset, onset+7d], clipped to the 14-day admission horizon so
            // positive onset days stay in 1..=14
            let start = onset.add_minutes(1);
            let end = Timestamp(onset.add_days(7).minutes() + 1).min(horizon);
            (start, end, Some(onset))
        }
    };

    let label = label_hyperkalemia(
        &patient.patient_id,
        &potassium,
        &calcium_gluconate,
        window_start,
        window_end,
        admit,
    );
    debug_assert!(label
        .onset_day
        .map(|d| (1..=14).contains(&d))
        .unwrap_or(true));

    Ok(CohortRow {
        patient_idx: idx,
        patient_id: patient.patient_id.clone(),
        included: true,
        exclusion_reason: None,
        label,
        aki_onset_time,
    })
}
