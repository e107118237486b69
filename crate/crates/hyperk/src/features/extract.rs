//! Raw day-1 feature extraction.
//!
//! Labs take the measurement in `[admit, admit+24h]` closest to admission,
//! falling back to the closest measurement in `[admit-12h, admit+48h]`;
//! ties break toward the earlier event. Fluid balance sums intake minus
//! output over `[admit, admit+24h)`. Medication and IV-fluid flags mark
//! any exposure in `[admit, admit+24h)`. The day-1 AKI stage is the max
//! stage over `[admit, admit+24h)`.

use super::{FeatureDictionary, FeatureMatrix, LAB_FEATURES};
use crate::clinical::{compute_stage_series, CohortTable};
use crate::error::Result;
use crate::ingest::{EventStore, FluidDirection, MedCategory};
use crate::time::{Timestamp, MINUTES_PER_DAY, MINUTES_PER_HOUR};

const BACKFILL_BEFORE_MIN: i64 = 12 * MINUTES_PER_HOUR;
const BACKFILL_AFTER_MIN: i64 = 48 * MINUTES_PER_HOUR;

/// Closest-to-admission lab selection with backfill. Ties break toward
/// the earlier event, then the smaller value (lab values are positive,
/// so bit order equals numeric order), keeping the pick independent of
/// input row order even for simultaneous draws.
fn select_lab(series: &[(Timestamp, f64)], admit: Timestamp) -> Option<f64> {
    let pick_closest = |lo: i64, hi: i64| -> Option<f64> {
        series
            .iter()
            .filter(|(t, _)| t.minutes() >= lo && t.minutes() <= hi)
            .min_by_key(|(t, v)| {
                (
                    (t.minutes() - admit.minutes()).abs(),
                    t.minutes(),
                    v.to_bits(),
                )
            })
            .map(|&(_, v)| v)
    };
    pick_closest(admit.minutes(), admit.minutes() + MINUTES_PER_DAY)
        .or_else(|| {
            pick_closest(
                admit.minutes() - BACKFILL_BEFORE_MIN,
                admit.minutes() + BACKFILL_AFTER_MIN,
            )
        })
}

/// Build the raw (pre-imputation) feature matrix over the cohort's
/// included rows, in cohort order.
pub fn extract_raw_features(
    store: &EventStore,
    cohort: &CohortTable,
    include_aki_stage: bool,
) -> Result<FeatureMatrix> {
    let dict = FeatureDictionary::standard(include_aki_stage);
    let rows: Vec<usize> = cohort.included().map(|r| r.patient_idx).collect();
    let ids: Vec<String> = rows
        .iter()
        .map(|&idx| store.patient(idx).patient_id.clone())
        .collect();
    let mut matrix = FeatureMatrix::new(dict, ids);

    let j_age = matrix.dict.index_of("age").unwrap();
    let j_sex = matrix.dict.index_of("sex").unwrap();
    let j_stage = matrix.dict.index_of("aki_stage_day1");
    let j_fluid = matrix.dict.index_of("fluid_balance_24h").unwrap();
    let lab_cols: Vec<usize> = LAB_FEATURES
        .iter()
        .map(|a| matrix.dict.index_of(a.token()).unwrap())
        .collect();
    let iv_cols: Vec<usize> = MedCategory::IV_FLUIDS
        .iter()
        .map(|c| matrix.dict.index_of(&format!("iv_{}", c.token())).unwrap())
        .collect();
    let med_cols: Vec<usize> = MedCategory::DRUGS
        .iter()
        .map(|c| matrix.dict.index_of(&format!("med_{}", c.token())).unwrap())
        .collect();

    for (i, &patient_idx) in rows.iter().enumerate() {
        let patient = store.patient(patient_idx);
        let events = store.events(patient_idx);
        let admit = patient.icu_admit_time;
        let day1_end = admit.add_days(1);

        matrix.set(i, j_age, patient.age);
        matrix.set(
            i,
            j_sex,
            match patient.sex {
                crate::ingest::Sex::Male => 1.0,
                crate::ingest::Sex::Female => 0.0,
            },
        );

        for (&analyte, &col) in LAB_FEATURES.iter().zip(&lab_cols) {
            let series = events.lab_series(analyte);
            match select_lab(&series, admit) {
                Some(v) => matrix.set(i, col, v),
                None => matrix.set_missing(i, col),
            }
        }

        if let Some(j) = j_stage {
            let series = compute_stage_series(store, patient_idx)?;
            matrix.set(i, j, series.max_in(admit, day1_end).as_u8() as f64);
        }

        let mut balance = 0.0;
        let mut any_fluid = false;
        for e in &events.fluids {
            if e.time >= admit && e.time < day1_end {
                any_fluid = true;
                match e.direction {
                    FluidDirection::Intake => balance += e.volume_ml,
                    FluidDirection::Output => balance -= e.volume_ml,
                }
            }
        }
        if any_fluid {
            matrix.set(i, j_fluid, balance);
        } else {
            matrix.set_missing(i, j_fluid);
        }

        for (cats, cols) in [
            (&MedCategory::IV_FLUIDS[..], &iv_cols),
            (&MedCategory::DRUGS[..], &med_cols),
        ] {
            for (&cat, &col) in cats.iter().zip(cols) {
                let exposed = events
                    .meds
                    .iter()
                    .any(|e| e.category == cat && e.time >= admit && e.time < day1_end);
                matrix.set(i, col, if exposed { 1.0 } else { 0.0 });
            }
        }
    }

    Ok(matrix)
}
