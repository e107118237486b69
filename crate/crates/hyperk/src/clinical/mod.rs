//! KDIGO AKI staging, hyperkalemia outcome labeling, and scenario cohort
//! construction.

mod cohort;
mod labeling;
mod staging;

pub use cohort::{build_cohort, CohortRow, CohortTable, ExclusionReason, Scenario};
pub use labeling::label_hyperkalemia;
pub use staging::{
    baseline_creatinine, compute_stage_series, stage_creatinine, stage_urine, StageSeries,
};

use crate::time::Timestamp;
use serde::{Deserialize, Serialize};

/// KDIGO acute kidney injury stage.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub enum AkiStage {
    #[default]
    S0,
    S1,
    S2,
    S3,
}

impl AkiStage {
    pub fn as_u8(self) -> u8 {
        match self {
            AkiStage::S0 => 0,
            AkiStage::S1 => 1,
            AkiStage::S2 => 2,
            AkiStage::S3 => 3,
        }
    }

    pub fn from_u8(v: u8) -> AkiStage {
        match v {
            0 => AkiStage::S0,
            1 => AkiStage::S1,
            2 => AkiStage::S2,
            _ => AkiStage::S3,
        }
    }
}

/// Outcome of the hyperkalemia labeling rules for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLabel {
    pub patient_id: String,
    pub hyperkalemic: bool,
    /// Time of the earliest confirmed K>=6 event; present iff hyperkalemic.
    pub onset_time: Option<Timestamp>,
    /// 1-based day index from ICU admission (admission day = day 1).
    pub onset_day: Option<i64>,
}

impl OutcomeLabel {
    pub fn negative(patient_id: &str) -> OutcomeLabel {
        OutcomeLabel {
            patient_id: patient_id.to_string(),
            hyperkalemic: false,
            onset_time: None,
            onset_day: None,
        }
    }
}
