//! CSV load/store for the six event tables.
//!
//! Wire format: `patients.csv`, `labs.csv`, `meds.csv`, `fluids.csv`,
//! `urine.csv`, `dialysis.csv` — UTF-8, RFC-4180 quoting, headers exactly
//! matching the field names. Leading `#` lines are skipped so artifact
//! files carrying a provenance comment reload cleanly.

use super::*;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub const PATIENTS_FILE: &str = "patients.csv";
pub const LABS_FILE: &str = "labs.csv";
pub const MEDS_FILE: &str = "meds.csv";
pub const FLUIDS_FILE: &str = "fluids.csv";
pub const URINE_FILE: &str = "urine.csv";
pub const DIALYSIS_FILE: &str = "dialysis.csv";

/// Optional header/token remapping, for loading extracts whose column
/// names or enum spellings differ from the canonical schema. Values in
/// each map are `canonical -> actual-in-file`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemaConfig {
    pub column_aliases: HashMap<String, String>,
    pub analyte_aliases: HashMap<String, String>,
    pub category_aliases: HashMap<String, String>,
}

impl SchemaConfig {
    fn column<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.column_aliases
            .get(canonical)
            .map(String::as_str)
            .unwrap_or(canonical)
    }

    fn analyte(&self, file_token: &str) -> String {
        self.reverse_alias(&self.analyte_aliases, file_token)
    }

    fn category(&self, file_token: &str) -> String {
        self.reverse_alias(&self.category_aliases, file_token)
    }

    fn reverse_alias(&self, map: &HashMap<String, String>, file_token: &str) -> String {
        for (canonical, actual) in map {
            if actual == file_token {
                return canonical.clone();
            }
        }
        file_token.to_string()
    }
}

struct TableReader {
    file: String,
    records: Vec<(u64, csv::StringRecord)>,
    columns: HashMap<String, usize>,
}

impl TableReader {
    fn open(dir: &Path, file: &str) -> Result<TableReader> {
        let path = dir.join(file);
        if !path.exists() {
            return Err(Error::data(format!(
                "missing file {} in {}",
                file,
                dir.display()
            )));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_path(&path)
            .map_err(|e| Error::data(format!("{file}: {e}")))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::data(format!("{file}: {e}")))?
            .clone();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::data(format!("{file}: {e}")))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            records.push((line, rec));
        }
        Ok(TableReader {
            file: file.to_string(),
            records,
            columns,
        })
    }

    /// Aliases are additive: the aliased header is tried first, the
    /// canonical name still resolves in files that use it.
    fn require(&self, canonical: &str, schema: &SchemaConfig) -> Result<usize> {
        let name = schema.column(canonical);
        self.columns
            .get(name)
            .or_else(|| self.columns.get(canonical))
            .copied()
            .ok_or_else(|| {
                Error::data(format!(
                    "{}: missing required column {canonical:?}",
                    self.file
                ))
            })
    }

    fn optional(&self, canonical: &str, schema: &SchemaConfig) -> Option<usize> {
        self.columns
            .get(schema.column(canonical))
            .or_else(|| self.columns.get(canonical))
            .copied()
    }

    fn field<'a>(
        &self,
        rec: &'a csv::StringRecord,
        line: u64,
        col: usize,
        name: &str,
    ) -> Result<&'a str> {
        rec.get(col).map(str::trim).ok_or_else(|| Error::Malformed {
            file: self.file.clone(),
            line,
            column: name.to_string(),
            message: "missing field".to_string(),
        })
    }

    fn malformed(&self, line: u64, column: &str, message: impl Into<String>) -> Error {
        Error::Malformed {
            file: self.file.clone(),
            line,
            column: column.to_string(),
            message: message.into(),
        }
    }
}

fn parse_f64(t: &TableReader, line: u64, column: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| t.malformed(line, column, format!("invalid number {raw:?}")))
}

fn parse_bool(t: &TableReader, line: u64, column: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(t.malformed(line, column, format!("invalid bool {raw:?}"))),
    }
}

fn parse_time(t: &TableReader, line: u64, column: &str, raw: &str) -> Result<Timestamp> {
    Timestamp::parse(raw).map_err(|_| t.malformed(line, column, format!("invalid timestamp {raw:?}")))
}

/// Load and validate the six CSV tables from `dir`.
///
/// Every event row must reference a known patient; unknown enum tokens and
/// malformed values are hard errors naming file, line, and column.
pub fn load_event_store(dir: &Path, schema: &SchemaConfig) -> Result<EventStore> {
    let patients = load_patients(dir, schema)?;
    let mut index: HashMap<String, usize> = HashMap::with_capacity(patients.len());
    for (i, p) in patients.iter().enumerate() {
        if index.insert(p.patient_id.clone(), i).is_some() {
            return Err(Error::data(format!(
                "patients.csv: duplicate patient_id {:?}",
                p.patient_id
            )));
        }
    }
    let mut events: Vec<PatientEvents> = vec![PatientEvents::default(); patients.len()];

    load_labs(dir, schema, &index, &mut events)?;
    load_meds(dir, schema, &index, &mut events)?;
    load_fluids(dir, schema, &index, &mut events)?;
    load_urine(dir, schema, &index, &mut events)?;
    load_dialysis(dir, schema, &index, &mut events)?;

    let store = EventStore::new(patients, events)?;
    let (labs, meds, fluids, urine, dialysis) = store.row_counts();
    log::info!(
        "loaded {} patients, {labs} labs, {meds} meds, {fluids} fluids, {urine} urine, {dialysis} dialysis",
        store.n_patients()
    );
    for p in store.patients() {
        if p.weight_kg.is_none() {
            log::warn!(
                "patient {:?} has no weight_kg; urine-output staging will be skipped",
                p.patient_id
            );
        }
    }
    Ok(store)
}

fn load_patients(dir: &Path, schema: &SchemaConfig) -> Result<Vec<Patient>> {
    let t = TableReader::open(dir, PATIENTS_FILE)?;
    let c_id = t.require("patient_id", schema)?;
    let c_admit = t.require("icu_admit_time", schema)?;
    let c_age = t.require("age", schema)?;
    let c_sex = t.require("sex", schema)?;
    let c_weight = t.optional("weight_kg", schema);
    let c_ckd = t.require("excl_ckd5_esrd", schema)?;
    let c_eol = t.require("excl_eol_24h", schema)?;
    let c_pd = t.require("excl_peritoneal_dialysis", schema)?;
    let c_hd = t.require("excl_hd_prior", schema)?;

    let mut patients = Vec::with_capacity(t.records.len());
    for (line, rec) in &t.records {
        let line = *line;
        let weight_kg = match c_weight {
            Some(c) => {
                let raw = t.field(rec, line, c, "weight_kg")?;
                if raw.is_empty() {
                    None
                } else {
                    Some(parse_f64(&t, line, "weight_kg", raw)?)
                }
            }
            None => None,
        };
        patients.push(Patient {
            patient_id: t.field(rec, line, c_id, "patient_id")?.to_string(),
            icu_admit_time: parse_time(
                &t,
                line,
                "icu_admit_time",
                t.field(rec, line, c_admit, "icu_admit_time")?,
            )?,
            age: parse_f64(&t, line, "age", t.field(rec, line, c_age, "age")?)?,
            sex: Sex::parse(t.field(rec, line, c_sex, "sex")?)
                .map_err(|e| t.malformed(line, "sex", e.to_string()))?,
            weight_kg,
            excl_ckd5_esrd: parse_bool(
                &t,
                line,
                "excl_ckd5_esrd",
                t.field(rec, line, c_ckd, "excl_ckd5_esrd")?,
            )?,
            excl_eol_24h: parse_bool(
                &t,
                line,
                "excl_eol_24h",
                t.field(rec, line, c_eol, "excl_eol_24h")?,
            )?,
            excl_peritoneal_dialysis: parse_bool(
                &t,
                line,
                "excl_peritoneal_dialysis",
                t.field(rec, line, c_pd, "excl_peritoneal_dialysis")?,
            )?,
            excl_hd_prior: parse_bool(
                &t,
                line,
                "excl_hd_prior",
                t.field(rec, line, c_hd, "excl_hd_prior")?,
            )?,
        });
    }
    Ok(patients)
}

fn resolve_patient(
    t: &TableReader,
    line: u64,
    index: &HashMap<String, usize>,
    id: &str,
) -> Result<usize> {
    index.get(id).copied().ok_or_else(|| {
        t.malformed(
            line,
            "patient_id",
            format!("orphan patient_id {id:?} not present in patients.csv"),
        )
    })
}

fn load_labs(
    dir: &Path,
    schema: &SchemaConfig,
    index: &HashMap<String, usize>,
    events: &mut [PatientEvents],
) -> Result<()> {
    let t = TableReader::open(dir, LABS_FILE)?;
    let c_id = t.require("patient_id", schema)?;
    let c_time = t.require("time", schema)?;
    let c_analyte = t.require("analyte", schema)?;
    let c_value = t.require("value", schema)?;
    for (line, rec) in &t.records {
        let line = *line;
        let pid = t.field(rec, line, c_id, "patient_id")?;
        let idx = resolve_patient(&t, line, index, pid)?;
        let analyte_token = schema.analyte(t.field(rec, line, c_analyte, "analyte")?);
        let analyte = Analyte::parse(&analyte_token)
            .map_err(|e| t.malformed(line, "analyte", e.to_string()))?;
        let value = parse_f64(&t, line, "value", t.field(rec, line, c_value, "value")?)?;
        analyte
            .validate_value(value)
            .map_err(|e| t.malformed(line, "value", e.to_string()))?;
        events[idx].labs.push(LabEvent {
            time: parse_time(&t, line, "time", t.field(rec, line, c_time, "time")?)?,
            analyte,
            value,
        });
    }
    Ok(())
}

fn load_meds(
    dir: &Path,
    schema: &SchemaConfig,
    index: &HashMap<String, usize>,
    events: &mut [PatientEvents],
) -> Result<()> {
    let t = TableReader::open(dir, MEDS_FILE)?;
    let c_id = t.require("patient_id", schema)?;
    let c_time = t.require("time", schema)?;
    let c_cat = t.require("category", schema)?;
    for (line, rec) in &t.records {
        let line = *line;
        let pid = t.field(rec, line, c_id, "patient_id")?;
        let idx = resolve_patient(&t, line, index, pid)?;
        let token = schema.category(t.field(rec, line, c_cat, "category")?);
        let category = MedCategory::parse(&token)
            .map_err(|e| t.malformed(line, "category", e.to_string()))?;
        events[idx].meds.push(MedEvent {
            time: parse_time(&t, line, "time", t.field(rec, line, c_time, "time")?)?,
            category,
        });
    }
    Ok(())
}

fn load_fluids(
    dir: &Path,
    schema: &SchemaConfig,
    index: &HashMap<String, usize>,
    events: &mut [PatientEvents],
) -> Result<()> {
    let t = TableReader::open(dir, FLUIDS_FILE)?;
    let c_id = t.require("patient_id", schema)?;
    let c_time = t.require("time", schema)?;
    let c_dir = t.require("direction", schema)?;
    let c_vol = t.require("volume_ml", schema)?;
    for (line, rec) in &t.records {
        let line = *line;
        let pid = t.field(rec, line, c_id, "patient_id")?;
        let idx = resolve_patient(&t, line, index, pid)?;
        let volume_ml = parse_f64(&t, line, "volume_ml", t.field(rec, line, c_vol, "volume_ml")?)?;
        if !volume_ml.is_finite() || volume_ml < 0.0 {
            return Err(t.malformed(
                line,
                "volume_ml",
                format!("volume_ml {volume_ml} must be finite and >= 0"),
            ));
        }
        events[idx].fluids.push(FluidEvent {
            time: parse_time(&t, line, "time", t.field(rec, line, c_time, "time")?)?,
            direction: FluidDirection::parse(t.field(rec, line, c_dir, "direction")?)
                .map_err(|e| t.malformed(line, "direction", e.to_string()))?,
            volume_ml,
        });
    }
    Ok(())
}

fn load_urine(
    dir: &Path,
    schema: &SchemaConfig,
    index: &HashMap<String, usize>,
    events: &mut [PatientEvents],
) -> Result<()> {
    let t = TableReader::open(dir, URINE_FILE)?;
    let c_id = t.require("patient_id", schema)?;
    let c_time = t.require("time", schema)?;
    let c_vol = t.require("volume_ml", schema)?;
    for (line, rec) in &t.records {
        let line = *line;
        let pid = t.field(rec, line, c_id, "patient_id")?;
        let idx = resolve_patient(&t, line, index, pid)?;
        let volume_ml = parse_f64(&t, line, "volume_ml", t.field(rec, line, c_vol, "volume_ml")?)?;
        if !volume_ml.is_finite() || volume_ml < 0.0 {
            return Err(t.malformed(
                line,
                "volume_ml",
                format!("volume_ml {volume_ml} must be finite and >= 0"),
            ));
        }
        events[idx].urine.push(UrineEvent {
            time: parse_time(&t, line, "time", t.field(rec, line, c_time, "time")?)?,
            volume_ml,
        });
    }
    Ok(())
}

fn load_dialysis(
    dir: &Path,
    schema: &SchemaConfig,
    index: &HashMap<String, usize>,
    events: &mut [PatientEvents],
) -> Result<()> {
    let t = TableReader::open(dir, DIALYSIS_FILE)?;
    let c_id = t.require("patient_id", schema)?;
    let c_time = t.require("time", schema)?;
    let c_mod = t.require("modality", schema)?;
    for (line, rec) in &t.records {
        let line = *line;
        let pid = t.field(rec, line, c_id, "patient_id")?;
        let idx = resolve_patient(&t, line, index, pid)?;
        events[idx].dialysis.push(DialysisEvent {
            time: parse_time(&t, line, "time", t.field(rec, line, c_time, "time")?)?,
            modality: DialysisModality::parse(t.field(rec, line, c_mod, "modality")?)
                .map_err(|e| t.malformed(line, "modality", e.to_string()))?,
        });
    }
    Ok(())
}

fn fmt_float(v: f64) -> String {
    // Shortest round-trip representation keeps written CSVs byte-stable.
    format!("{v}")
}

/// Write the six canonical CSV files into `dir` (created if absent).
pub fn write_event_store(store: &EventStore, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join(PATIENTS_FILE))?;
    w.write_record([
        "patient_id",
        "icu_admit_time",
        "age",
        "sex",
        "weight_kg",
        "excl_ckd5_esrd",
        "excl_eol_24h",
        "excl_peritoneal_dialysis",
        "excl_hd_prior",
    ])?;
    for p in store.patients() {
        w.write_record([
            p.patient_id.as_str(),
            &p.icu_admit_time.to_string(),
            &fmt_float(p.age),
            p.sex.token(),
            &p.weight_kg.map(fmt_float).unwrap_or_default(),
            &p.excl_ckd5_esrd.to_string(),
            &p.excl_eol_24h.to_string(),
            &p.excl_peritoneal_dialysis.to_string(),
            &p.excl_hd_prior.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(LABS_FILE))?;
    w.write_record(["patient_id", "time", "analyte", "value"])?;
    for (i, p) in store.patients().iter().enumerate() {
        for e in &store.events(i).labs {
            w.write_record([
                p.patient_id.as_str(),
                &e.time.to_string(),
                e.analyte.token(),
                &fmt_float(e.value),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(MEDS_FILE))?;
    w.write_record(["patient_id", "time", "category"])?;
    for (i, p) in store.patients().iter().enumerate() {
        for e in &store.events(i).meds {
            w.write_record([p.patient_id.as_str(), &e.time.to_string(), e.category.token()])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(FLUIDS_FILE))?;
    w.write_record(["patient_id", "time", "direction", "volume_ml"])?;
    for (i, p) in store.patients().iter().enumerate() {
        for e in &store.events(i).fluids {
            w.write_record([
                p.patient_id.as_str(),
                &e.time.to_string(),
                e.direction.token(),
                &fmt_float(e.volume_ml),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(URINE_FILE))?;
    w.write_record(["patient_id", "time", "volume_ml"])?;
    for (i, p) in store.patients().iter().enumerate() {
        for e in &store.events(i).urine {
            w.write_record([
                p.patient_id.as_str(),
                &e.time.to_string(),
                &fmt_float(e.volume_ml),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(DIALYSIS_FILE))?;
    w.write_record(["patient_id", "time", "modality"])?;
    for (i, p) in store.patients().iter().enumerate() {
        for e in &store.events(i).dialysis {
            w.write_record([p.patient_id.as_str(), &e.time.to_string(), e.modality.token()])?;
        }
    }
    w.flush()?;

    Ok(())
}
