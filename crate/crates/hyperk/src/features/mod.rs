//! Day-1 feature engineering: admission-nearest labs, 24h fluid balance,
//! medication/IV-fluid flags, day-1 AKI stage; kNN imputation and
//! train-fitted normalization.

mod extract;
mod impute;
mod normalize;

pub use extract::extract_raw_features;
pub use impute::impute_knn;
pub use normalize::{apply_normalizer, fit_normalizer, normalize, NormParams};

use crate::ingest::{Analyte, MedCategory};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    pub unit: String,
}

/// Ordered feature list; the order is fixed per configuration and stamped
/// into every matrix and model so attribution indices stay aligned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDictionary {
    defs: Vec<FeatureDef>,
}

/// The 12 lab features (creatinine feeds staging, not the feature set).
pub const LAB_FEATURES: [Analyte; 12] = [
    Analyte::Potassium,
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

impl FeatureDictionary {
    /// The standard dictionary: age, sex, 12 labs, optional day-1 AKI
    /// stage, 24h fluid balance, 5 IV-fluid flags, 18 medication flags.
    pub fn standard(include_aki_stage: bool) -> FeatureDictionary {
        let mut defs = Vec::new();
        let def = |name: &str, kind, unit: &str| FeatureDef {
            name: name.to_string(),
            kind,
            unit: unit.to_string(),
        };
        defs.push(def("age", FeatureKind::Continuous, "years"));
        defs.push(def("sex", FeatureKind::Binary, "male=1"));
        for analyte in LAB_FEATURES {
            defs.push(def(analyte.token(), FeatureKind::Continuous, analyte.unit()));
        }
        if include_aki_stage {
            defs.push(def("aki_stage_day1", FeatureKind::Ordinal, "stage"));
        }
        defs.push(def("fluid_balance_24h", FeatureKind::Continuous, "mL"));
        for iv in MedCategory::IV_FLUIDS {
            defs.push(def(&format!("iv_{}", iv.token()), FeatureKind::Binary, ""));
        }
        for drug in MedCategory::DRUGS {
            defs.push(def(&format!("med_{}", drug.token()), FeatureKind::Binary, ""));
        }
        FeatureDictionary { defs }
    }

    /// Ad-hoc dictionary, for callers that bring their own columns
    /// (mostly tests and the attribution oracles).
    pub fn synthetic(columns: &[(String, FeatureKind)]) -> FeatureDictionary {
        FeatureDictionary {
            defs: columns
                .iter()
                .map(|(name, kind)| FeatureDef {
                    name: name.clone(),
                    kind: *kind,
                    unit: String::new(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn defs(&self) -> &[FeatureDef] {
        &self.defs
    }

    pub fn names(&self) -> Vec<&str> {
        self.defs.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }

    pub fn kind(&self, j: usize) -> FeatureKind {
        self.defs[j].kind
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        self.defs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kind == FeatureKind::Continuous)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Dense row-major feature matrix with a pre-imputation missingness mask.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub dict: FeatureDictionary,
    pub patient_ids: Vec<String>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(dict: FeatureDictionary, patient_ids: Vec<String>) -> FeatureMatrix {
        let n = patient_ids.len();
        let p = dict.len();
        FeatureMatrix {
            dict,
            patient_ids,
            values: vec![f64::NAN; n * p],
            mask: vec![true; n * p],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.dict.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let p = self.n_features();
        self.values[i * p + j] = v;
        self.mask[i * p + j] = false;
    }

    pub fn set_missing(&mut self, i: usize, j: usize) {
        let p = self.n_features();
        self.values[i * p + j] = f64::NAN;
        self.mask[i * p + j] = true;
    }

    /// Overwrite a value without touching the missingness mask.
    pub fn fill(&mut self, i: usize, j: usize, v: f64) {
        let p = self.n_features();
        self.values[i * p + j] = v;
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n_features() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn has_missing(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }

    /// New matrix holding the given rows (in the given order); values and
    /// mask are copied verbatim, so it works pre- and post-imputation.
    pub fn subset_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let ids: Vec<String> = rows.iter().map(|&i| self.patient_ids[i].clone()).collect();
        let mut out = FeatureMatrix::new(self.dict.clone(), ids);
        let p = self.n_features();
        for (new_i, &old_i) in rows.iter().enumerate() {
            for j in 0..p {
                out.values[new_i * p + j] = self.values[old_i * p + j];
                out.mask[new_i * p + j] = self.mask[old_i * p + j];
            }
        }
        out
    }

    pub fn n_missing_per_feature(&self) -> Vec<usize> {
        let p = self.n_features();
        let mut counts = vec![0usize; p];
        for i in 0..self.n_rows() {
            for (j, c) in counts.iter_mut().enumerate() {
                if self.mask[i * p + j] {
                    *c += 1;
                }
            }
        }
        counts
    }
}

/// Stable identity of a training split, stamped on fitted parameters so
/// leakage audits can assert provenance.
pub fn provenance_hash(train_ids: &[String]) -> u64 {
    let mut sorted: Vec<&String> = train_ids.iter().collect();
    sorted.sort();
    let mut hasher = Sha256::new();
    for id in sorted {
        hasher.update(id.as_bytes());
        hasher.update([0]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dictionary_has_expected_size_and_order() {
        let dict = FeatureDictionary::standard(true);
        // 2 demographics + 12 labs + stage + fluid balance + 5 IV + 18 meds
        assert_eq!(dict.len(), 39);
        assert_eq!(dict.defs()[0].name, "age");
        assert_eq!(dict.defs()[1].name, "sex");
        assert!(dict.index_of("potassium").is_some());
        assert!(dict.index_of("aki_stage_day1").is_some());
        assert!(dict.index_of("med_vasopressor").is_some());
        assert!(dict.index_of("iv_saline").is_some());
        assert!(dict.index_of("creatinine").is_none());

        let without = FeatureDictionary::standard(false);
        assert_eq!(without.len(), 38);
        assert!(without.index_of("aki_stage_day1").is_none());
    }

    #[test]
    fn dictionary_order_is_stable_across_rebuilds() {
        let a = FeatureDictionary::standard(true);
        let b = FeatureDictionary::standard(true);
        assert_eq!(a, b);
    }

    #[test]
    fn names_unique() {
        let dict = FeatureDictionary::standard(true);
        let mut names = dict.names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), dict.len());
    }

    #[test]
    fn provenance_hash_is_order_invariant() {
        let a = provenance_hash(&["x".into(), "y".into()]);
        let b = provenance_hash(&["y".into(), "x".into()]);
        assert_eq!(a, b);
        let c = provenance_hash(&["x".into(), "z".into()]);
        assert_ne!(a, c);
    }
}
