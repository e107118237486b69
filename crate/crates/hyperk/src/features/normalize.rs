//! Train-fitted z-scoring of continuous features.
//!
//! Binary and ordinal features pass through untouched. Parameters are
//! computed on training rows only (population mean/sd) and stamped with
//! the training split's provenance hash for leakage audits.

use super::{provenance_hash, FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    /// Per-feature mean (0 for pass-through features).
    pub means: Vec<f64>,
    /// Per-feature sd (1 for pass-through and zero-variance features).
    pub sds: Vec<f64>,
    pub provenance_hash: u64,
}

pub fn fit_normalizer(matrix: &FeatureMatrix, train_rows: &[usize]) -> Result<NormParams> {
    if train_rows.is_empty() {
        return Err(Error::config("fit_normalizer: empty training set"));
    }
    let p = matrix.n_features();
    let mut means = vec![0.0; p];
    let mut sds = vec![1.0; p];
    for j in 0..p {
        if matrix.dict.kind(j) != FeatureKind::Continuous {
            continue;
        }
        let n = train_rows.len() as f64;
        let mean = train_rows.iter().map(|&r| matrix.get(r, j)).sum::<f64>() / n;
        let var = train_rows
            .iter()
            .map(|&r| {
                let d = matrix.get(r, j) - mean;
                d * d
            })
            .sum::<f64>()
            / n;
        means[j] = mean;
        if var > 0.0 {
            sds[j] = var.sqrt();
        } else {
            log::warn!(
                "feature {:?} has zero training variance; passing through with sd=1",
                matrix.dict.defs()[j].name
            );
        }
    }
    let ids: Vec<String> = train_rows
        .iter()
        .map(|&r| matrix.patient_ids[r].clone())
        .collect();
    Ok(NormParams {
        means,
        sds,
        provenance_hash: provenance_hash(&ids),
    })
}

/// Apply stored parameters: `(x - mean) / sd` per feature.
pub fn apply_normalizer(matrix: &FeatureMatrix, params: &NormParams) -> Result<FeatureMatrix> {
    if params.means.len() != matrix.n_features() {
        return Err(Error::config(format!(
            "normalizer has {} features, matrix has {}",
            params.means.len(),
            matrix.n_features()
        )));
    }
    let mut out = matrix.clone();
    for i in 0..out.n_rows() {
        for j in 0..out.n_features() {
            let v = (matrix.get(i, j) - params.means[j]) / params.sds[j];
            out.fill(i, j, v);
        }
    }
    Ok(out)
}

/// Fit on training rows and apply to the whole matrix.
pub fn normalize(matrix: &FeatureMatrix, train_rows: &[usize]) -> Result<(FeatureMatrix, NormParams)> {
    if matrix.has_missing() {
        let nan_cells = (0..matrix.n_rows())
            .flat_map(|i| matrix.row(i).iter().copied())
            .filter(|v| v.is_nan())
            .count();
        if nan_cells > 0 {
            return Err(Error::numeric(
                "normalize called before imputation completed",
            ));
        }
    }
    let params = fit_normalizer(matrix, train_rows)?;
    let out = apply_normalizer(matrix, &params)?;
    Ok((out, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureDictionary;

    fn two_row_matrix(vals: [f64; 2]) -> FeatureMatrix {
        let dict = FeatureDictionary::standard(false);
        let mut m = FeatureMatrix::new(dict, vec!["a".into(), "b".into()]);
        for i in 0..2 {
            for j in 0..m.n_features() {
                m.set(i, j, 0.0);
            }
        }
        let j_age = m.dict.index_of("age").unwrap();
        m.set(0, j_age, vals[0]);
        m.set(1, j_age, vals[1]);
        m
    }

    #[test]
    fn two_point_zscore() {
        let m = two_row_matrix([2.0, 4.0]);
        let (out, params) = normalize(&m, &[0, 1]).unwrap();
        let j = m.dict.index_of("age").unwrap();
        assert_eq!(out.get(0, j), -1.0);
        assert_eq!(out.get(1, j), 1.0);
        assert_eq!(params.means[j], 3.0);
        assert_eq!(params.sds[j], 1.0);
    }

    #[test]
    fn binary_features_pass_through() {
        let dict = FeatureDictionary::standard(false);
        let j_sex = dict.index_of("sex").unwrap();
        let mut m = FeatureMatrix::new(dict, vec!["a".into(), "b".into()]);
        for i in 0..2 {
            for j in 0..m.n_features() {
                m.set(i, j, 0.0);
            }
        }
        m.set(0, j_sex, 1.0);
        let (out, _) = normalize(&m, &[0, 1]).unwrap();
        assert_eq!(out.get(0, j_sex), 1.0);
        assert_eq!(out.get(1, j_sex), 0.0);
    }

    #[test]
    fn stored_params_reproduce_the_transform() {
        let m = two_row_matrix([10.0, 30.0]);
        let (_, params) = normalize(&m, &[0, 1]).unwrap();
        let fresh = two_row_matrix([10.0, 30.0]);
        let out = apply_normalizer(&fresh, &params).unwrap();
        let j = m.dict.index_of("age").unwrap();
        for i in 0..2 {
            let expect = (m.get(i, j) - params.means[j]) / params.sds[j];
            assert_eq!(out.get(i, j), expect);
        }
    }

    #[test]
    fn zero_variance_passes_through_with_unit_sd() {
        let m = two_row_matrix([5.0, 5.0]);
        let (out, params) = normalize(&m, &[0, 1]).unwrap();
        let j = m.dict.index_of("age").unwrap();
        assert_eq!(params.sds[j], 1.0);
        assert_eq!(out.get(0, j), 0.0);
    }

    #[test]
    fn params_depend_only_on_training_rows() {
        let m = two_row_matrix([2.0, 4.0]);
        let p_both = fit_normalizer(&m, &[0, 1]).unwrap();
        let p_first = fit_normalizer(&m, &[0]).unwrap();
        let j = m.dict.index_of("age").unwrap();
        assert_ne!(p_both.means[j], p_first.means[j]);
        assert_ne!(p_both.provenance_hash, p_first.provenance_hash);
    }
}
