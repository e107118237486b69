//! Clinical event ingestion: validated, time-indexed per-patient event
//! collections loaded from CSV, plus a seeded synthetic cohort generator.

mod csv_io;
mod synth;

pub use csv_io::{load_event_store, write_event_store, SchemaConfig};
pub use synth::{generate_synthetic, EffectSizes, SynthConfig};

use crate::error::{Error, Result};
use crate::time::Timestamp;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn parse(s: &str) -> Result<Sex> {
        match s {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            other => Err(Error::data(format!("unknown sex token {other:?}"))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Patient {
    pub patient_id: String,
    pub icu_admit_time: Timestamp,
    pub age: f64,
    pub sex: Sex,
    pub weight_kg: Option<f64>,
    pub excl_ckd5_esrd: bool,
    pub excl_eol_24h: bool,
    pub excl_peritoneal_dialysis: bool,
    pub excl_hd_prior: bool,
}

/// Measured analytes, one canonical unit each. Callers pre-convert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analyte {
    /// mEq/L
    Potassium,
    /// mg/dL
    Creatinine,
    /// mg/dL
    Phosphate,
    /// U/L
    CreatineKinase,
    /// mg/dL
    Glucose,
    /// mmol/L
    Lactate,
    Ph,
    /// K/uL
    Wbc,
    /// mEq/L
    Chloride,
    /// mg/dL
    Bilirubin,
    /// K/uL
    Platelet,
    /// U/L
    Alt,
    /// g/dL
    Hemoglobin,
}

impl Analyte {
    pub const ALL: [Analyte; 13] = [
        Analyte::Potassium,
        Analyte::Creatinine,
        Analyte::Phosphate,
        Analyte::CreatineKinase,
        Analyte::Glucose,
        Analyte::Lactate,
        Analyte::Ph,
        Analyte::Wbc,
        Analyte::Chloride,
        Analyte::Bilirubin,
        Analyte::Platelet,
        Analyte::Alt,
        Analyte::Hemoglobin,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Analyte::Potassium => "potassium",
            Analyte::Creatinine => "creatinine",
            Analyte::Phosphate => "phosphate",
            Analyte::CreatineKinase => "creatine_kinase",
            Analyte::Glucose => "glucose",
            Analyte::Lactate => "lactate",
            Analyte::Ph => "ph",
            Analyte::Wbc => "wbc",
            Analyte::Chloride => "chloride",
            Analyte::Bilirubin => "bilirubin",
            Analyte::Platelet => "platelet",
            Analyte::Alt => "alt",
            Analyte::Hemoglobin => "hemoglobin",
        }
    }

    pub fn parse(s: &str) -> Result<Analyte> {
        Self::ALL
            .into_iter()
            .find(|a| a.token() == s)
            .ok_or_else(|| Error::data(format!("unknown analyte token {s:?}")))
    }

    pub fn unit(self) -> &'static str {
        match self {
            Analyte::Potassium | Analyte::Chloride => "mEq/L",
            Analyte::Creatinine | Analyte::Phosphate | Analyte::Glucose | Analyte::Bilirubin => {
                "mg/dL"
            }
            Analyte::CreatineKinase | Analyte::Alt => "U/L",
            Analyte::Lactate => "mmol/L",
            Analyte::Ph => "",
            Analyte::Wbc | Analyte::Platelet => "K/uL",
            Analyte::Hemoglobin => "g/dL",
        }
    }

    /// Value validation: finite and > 0, except pH which lives in [6.5, 8.0].
    pub fn validate_value(self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::data(format!(
                "non-finite value for {}",
                self.token()
            )));
        }
        match self {
            Analyte::Ph => {
                if !(6.5..=8.0).contains(&value) {
                    return Err(Error::data(format!("ph {value} outside [6.5, 8.0]")));
                }
            }
            _ => {
                if value <= 0.0 {
                    return Err(Error::data(format!(
                        "non-positive value {value} for {}",
                        self.token()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabEvent {
    pub time: Timestamp,
    pub analyte: Analyte,
    pub value: f64,
}

/// Medication categories plus IV-fluid tokens, one closed enum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedCategory {
    AceiArb,
    LoopThiazideDiuretic,
    Nsaid,
    BetaBlocker,
    Steroid,
    BetaAgonist,
    KSparingDiuretic,
    CarbonicAnhydraseInhibitor,
    Digoxin,
    Heparin,
    PotassiumChloride,
    Succinylcholine,
    Insulin,
    SodiumBicarbonate,
    CalciumGluconate,
    Nitroglycerin,
    Labetalol,
    Vasopressor,
    // IV fluids
    Saline,
    Hartmann,
    Plasmalyte,
    Dextrose5,
    Dextrose10,
}

impl MedCategory {
    pub const DRUGS: [MedCategory; 18] = [
        MedCategory::AceiArb,
        MedCategory::LoopThiazideDiuretic,
        MedCategory::Nsaid,
        MedCategory::BetaBlocker,
        MedCategory::Steroid,
        MedCategory::BetaAgonist,
        MedCategory::KSparingDiuretic,
        MedCategory::CarbonicAnhydraseInhibitor,
        MedCategory::Digoxin,
        MedCategory::Heparin,
        MedCategory::PotassiumChloride,
        MedCategory::Succinylcholine,
        MedCategory::Insulin,
        MedCategory::SodiumBicarbonate,
        MedCategory::CalciumGluconate,
        MedCategory::Nitroglycerin,
        MedCategory::Labetalol,
        MedCategory::Vasopressor,
    ];

    pub const IV_FLUIDS: [MedCategory; 5] = [
        MedCategory::Saline,
        MedCategory::Hartmann,
        MedCategory::Plasmalyte,
        MedCategory::Dextrose5,
        MedCategory::Dextrose10,
    ];

    pub fn token(self) -> &'static str {
        match self {
            MedCategory::AceiArb => "acei_arb",
            MedCategory::LoopThiazideDiuretic => "loop_thiazide_diuretic",
            MedCategory::Nsaid => "nsaid",
            MedCategory::BetaBlocker => "beta_blocker",
            MedCategory::Steroid => "steroid",
            MedCategory::BetaAgonist => "beta_agonist",
            MedCategory::KSparingDiuretic => "k_sparing_diuretic",
            MedCategory::CarbonicAnhydraseInhibitor => "carbonic_anhydrase_inhibitor",
            MedCategory::Digoxin => "digoxin",
            MedCategory::Heparin => "heparin",
            MedCategory::PotassiumChloride => "potassium_chloride",
            MedCategory::Succinylcholine => "succinylcholine",
            MedCategory::Insulin => "insulin",
            MedCategory::SodiumBicarbonate => "sodium_bicarbonate",
            MedCategory::CalciumGluconate => "calcium_gluconate",
            MedCategory::Nitroglycerin => "nitroglycerin",
            MedCategory::Labetalol => "labetalol",
            MedCategory::Vasopressor => "vasopressor",
            MedCategory::Saline => "saline",
            MedCategory::Hartmann => "hartmann",
            MedCategory::Plasmalyte => "plasmalyte",
            MedCategory::Dextrose5 => "dextrose5",
            MedCategory::Dextrose10 => "dextrose10",
        }
    }

    pub fn parse(s: &str) -> Result<MedCategory> {
        Self::DRUGS
            .into_iter()
            .chain(Self::IV_FLUIDS)
            .find(|c| c.token() == s)
            .ok_or_else(|| Error::data(format!("unknown medication category token {s:?}")))
    }

    pub fn is_iv_fluid(self) -> bool {
        Self::IV_FLUIDS.contains(&self)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedEvent {
    pub time: Timestamp,
    pub category: MedCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluidDirection {
    Intake,
    Output,
}

impl FluidDirection {
    pub fn parse(s: &str) -> Result<FluidDirection> {
        match s {
            "intake" => Ok(FluidDirection::Intake),
            "output" => Ok(FluidDirection::Output),
            other => Err(Error::data(format!("unknown fluid direction {other:?}"))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FluidDirection::Intake => "intake",
            FluidDirection::Output => "output",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluidEvent {
    pub time: Timestamp,
    pub direction: FluidDirection,
    pub volume_ml: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UrineEvent {
    pub time: Timestamp,
    pub volume_ml: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialysisModality {
    Hemodialysis,
    Crrt,
}

impl DialysisModality {
    pub fn parse(s: &str) -> Result<DialysisModality> {
        match s {
            "hemodialysis" => Ok(DialysisModality::Hemodialysis),
            "crrt" => Ok(DialysisModality::Crrt),
            other => Err(Error::data(format!("unknown dialysis modality {other:?}"))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            DialysisModality::Hemodialysis => "hemodialysis",
            DialysisModality::Crrt => "crrt",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DialysisEvent {
    pub time: Timestamp,
    pub modality: DialysisModality,
}

/// Per-patient event lists, time-sorted after load.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PatientEvents {
    pub labs: Vec<LabEvent>,
    pub meds: Vec<MedEvent>,
    pub fluids: Vec<FluidEvent>,
    pub urine: Vec<UrineEvent>,
    pub dialysis: Vec<DialysisEvent>,
}

impl PatientEvents {
    fn sort(&mut self) {
        self.labs.sort_by_key(|e| e.time);
        self.meds.sort_by_key(|e| e.time);
        self.fluids.sort_by_key(|e| e.time);
        self.urine.sort_by_key(|e| e.time);
        self.dialysis.sort_by_key(|e| e.time);
    }

    /// Time-sorted (time, value) pairs for one analyte.
    pub fn lab_series(&self, analyte: Analyte) -> Vec<(Timestamp, f64)> {
        self.labs
            .iter()
            .filter(|e| e.analyte == analyte)
            .map(|e| (e.time, e.value))
            .collect()
    }

    pub fn med_times(&self, category: MedCategory) -> Vec<Timestamp> {
        self.meds
            .iter()
            .filter(|e| e.category == category)
            .map(|e| e.time)
            .collect()
    }
}

/// Immutable after load; safe to share read-only across parallel workers.
#[derive(Debug, Clone, Default)]
pub struct EventStore {
    patients: Vec<Patient>,
    events: Vec<PatientEvents>,
    index: HashMap<String, usize>,
}

impl EventStore {
    /// Build a validated store from patients and per-patient events.
    /// Rejects duplicate patient ids and invalid patient rows; sorts all
    /// event lists by time.
    pub fn new(patients: Vec<Patient>, mut events: Vec<PatientEvents>) -> Result<EventStore> {
        assert_eq!(patients.len(), events.len());
        let mut index = HashMap::with_capacity(patients.len());
        for (i, p) in patients.iter().enumerate() {
            validate_patient(p)?;
            if index.insert(p.patient_id.clone(), i).is_some() {
                return Err(Error::data(format!(
                    "duplicate patient_id {:?}",
                    p.patient_id
                )));
            }
        }
        for ev in &mut events {
            ev.sort();
        }
        Ok(EventStore {
            patients,
            events,
            index,
        })
    }

    pub fn n_patients(&self) -> usize {
        self.patients.len()
    }

    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn patient(&self, idx: usize) -> &Patient {
        &self.patients[idx]
    }

    pub fn events(&self, idx: usize) -> &PatientEvents {
        &self.events[idx]
    }

    pub fn lookup(&self, patient_id: &str) -> Option<usize> {
        self.index.get(patient_id).copied()
    }

    /// Total event rows per kind: (labs, meds, fluids, urine, dialysis).
    pub fn row_counts(&self) -> (usize, usize, usize, usize, usize) {
        let mut c = (0, 0, 0, 0, 0);
        for ev in &self.events {
            c.0 += ev.labs.len();
            c.1 += ev.meds.len();
            c.2 += ev.fluids.len();
            c.3 += ev.urine.len();
            c.4 += ev.dialysis.len();
        }
        c
    }
}

fn validate_patient(p: &Patient) -> Result<()> {
    if p.patient_id.is_empty() {
        return Err(Error::data("empty patient_id"));
    }
    if !p.age.is_finite() || p.age < 0.0 {
        return Err(Error::data(format!(
            "patient {:?}: age {} invalid",
            p.patient_id, p.age
        )));
    }
    if let Some(w) = p.weight_kg {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::data(format!(
                "patient {:?}: weight_kg {} must be > 0",
                p.patient_id, w
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patient(id: &str) -> Patient {
        Patient {
            patient_id: id.to_string(),
            icu_admit_time: Timestamp::parse("2023-01-01T00:00Z").unwrap(),
            age: 50.0,
            sex: Sex::Female,
            weight_kg: Some(70.0),
            excl_ckd5_esrd: false,
            excl_eol_24h: false,
            excl_peritoneal_dialysis: false,
            excl_hd_prior: false,
        }
    }

    #[test]
    fn duplicate_patient_id_rejected() {
        let err = EventStore::new(
            vec![patient("a"), patient("a")],
            vec![PatientEvents::default(), PatientEvents::default()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate patient_id"));
    }

    #[test]
    fn events_sorted_on_construction() {
        let mut ev = PatientEvents::default();
        ev.labs.push(LabEvent {
            time: Timestamp(100),
            analyte: Analyte::Potassium,
            value: 4.0,
        });
        ev.labs.push(LabEvent {
            time: Timestamp(50),
            analyte: Analyte::Potassium,
            value: 4.2,
        });
        let store = EventStore::new(vec![patient("a")], vec![ev]).unwrap();
        let series = store.events(0).lab_series(Analyte::Potassium);
        assert_eq!(series[0].0, Timestamp(50));
        assert_eq!(series[1].0, Timestamp(100));
    }

    #[test]
    fn ph_range_enforced() {
        assert!(Analyte::Ph.validate_value(7.4).is_ok());
        assert!(Analyte::Ph.validate_value(6.4).is_err());
        assert!(Analyte::Potassium.validate_value(0.0).is_err());
        assert!(Analyte::Potassium.validate_value(f64::NAN).is_err());
    }

    #[test]
    fn med_tokens_round_trip() {
        for c in MedCategory::DRUGS.into_iter().chain(MedCategory::IV_FLUIDS) {
            assert_eq!(MedCategory::parse(c.token()).unwrap(), c);
        }
        assert!(MedCategory::parse("warfarin").is_err());
    }
}
