//! k-nearest-neighbor imputation fitted on training rows only.
//!
//! Distances run over mutually observed continuous features on
//! training-standardized values, rescaled by the number of usable
//! dimensions (root-mean-square per dimension), so rows with different
//! missingness patterns stay comparable. Neighbors are always training
//! rows; ties at rank k break toward the lower row index.

use super::FeatureMatrix;
use crate::error::{Error, Result};
use rayon::prelude::*;

struct DistanceSpace {
    continuous: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl DistanceSpace {
    fn fit(matrix: &FeatureMatrix, train_rows: &[usize]) -> DistanceSpace {
        let continuous = matrix.dict.continuous_indices();
        let mut means = vec![0.0; continuous.len()];
        let mut sds = vec![1.0; continuous.len()];
        for (d, &j) in continuous.iter().enumerate() {
            let observed: Vec<f64> = train_rows
                .iter()
                .filter(|&&r| !matrix.is_missing(r, j))
                .map(|&r| matrix.get(r, j))
                .collect();
            if observed.is_empty() {
                continue;
            }
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            let var =
                observed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / observed.len() as f64;
            means[d] = mean;
            sds[d] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        DistanceSpace {
            continuous,
            means,
            sds,
        }
    }

    /// RMS distance over mutually observed continuous dimensions;
    /// `None` when no dimension is shared.
    fn distance(&self, matrix: &FeatureMatrix, a: usize, b: usize) -> Option<f64> {
        let mut sum = 0.0;
        let mut used = 0usize;
        for (d, &j) in self.continuous.iter().enumerate() {
            if matrix.is_missing(a, j) || matrix.is_missing(b, j) {
                continue;
            }
            let za = (matrix.get(a, j) - self.means[d]) / self.sds[d];
            let zb = (matrix.get(b, j) - self.means[d]) / self.sds[d];
            sum += (za - zb) * (za - zb);
            used += 1;
        }
        if used == 0 {
            None
        } else {
            Some((sum / used as f64).sqrt())
        }
    }
}

/// Fill every missing cell; the mask still records original missingness.
pub fn impute_knn(matrix: &FeatureMatrix, k: usize, train_rows: &[usize]) -> Result<FeatureMatrix> {
    if k < 1 {
        return Err(Error::config(format!("impute_knn: k {k} < 1")));
    }
    if !matrix.has_missing() {
        return Ok(matrix.clone());
    }
    let space = DistanceSpace::fit(matrix, train_rows);
    let p = matrix.n_features();

    // Global training means per feature, the fallback when no neighbor
    // shares an observed dimension.
    let mut global_means: Vec<Option<f64>> = vec![None; p];
    for j in 0..p {
        let observed: Vec<f64> = train_rows
            .iter()
            .filter(|&&r| !matrix.is_missing(r, j))
            .map(|&r| matrix.get(r, j))
            .collect();
        if !observed.is_empty() {
            global_means[j] = Some(observed.iter().sum::<f64>() / observed.len() as f64);
        }
    }

    let rows_with_missing: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| (0..p).any(|j| matrix.is_missing(i, j)))
        .collect();

    let fills: Vec<(usize, usize, f64)> = rows_with_missing
        .par_iter()
        .map(|&i| {
            let mut row_fills = Vec::new();
            for j in 0..p {
                if !matrix.is_missing(i, j) {
                    continue;
                }
                let value = impute_cell(matrix, &space, train_rows, &global_means, i, j, k)?;
                row_fills.push((i, j, value));
            }
            Ok::<_, Error>(row_fills)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut out = matrix.clone();
    for (i, j, v) in fills {
        out.fill(i, j, v);
    }
    debug_assert!(!(0..out.n_rows()).any(|i| out.row(i).iter().any(|v| v.is_nan())));
    Ok(out)
}

fn impute_cell(
    matrix: &FeatureMatrix,
    space: &DistanceSpace,
    train_rows: &[usize],
    global_means: &[Option<f64>],
    i: usize,
    j: usize,
    k: usize,
) -> Result<f64> {
    let mut candidates: Vec<(f64, usize)> = train_rows
        .iter()
        .filter(|&&r| r != i && !matrix.is_missing(r, j))
        .filter_map(|&r| space.distance(matrix, i, r).map(|d| (d, r)))
        .collect();
    if candidates.is_empty() {
        return global_means[j].ok_or_else(|| {
            Error::data(format!(
                "feature {:?} has no observed training value to impute from",
                matrix.dict.defs()[j].name
            ))
        });
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let take = candidates.len().min(k);
    let sum: f64 = candidates[..take]
        .iter()
        .map(|&(_, r)| matrix.get(r, j))
        .sum();
    Ok(sum / take as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureDictionary, FeatureKind};

    fn matrix_from(rows: &[Vec<Option<f64>>]) -> FeatureMatrix {
        let p = rows[0].len();
        let defs: Vec<(String, FeatureKind)> = (0..p)
            .map(|j| (format!("f{j}"), FeatureKind::Continuous))
            .collect();
        let dict = FeatureDictionary::synthetic(&defs);
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        let mut m = FeatureMatrix::new(dict, ids);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                match v {
                    Some(x) => m.set(i, j, *x),
                    None => m.set_missing(i, j),
                }
            }
        }
        m
    }

    #[test]
    fn complete_matrix_is_unchanged() {
        let m = matrix_from(&[vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]]);
        let out = impute_knn(&m, 3, &[0, 1]).unwrap();
        for i in 0..2 {
            assert_eq!(m.row(i), out.row(i));
        }
    }

    #[test]
    fn knn_mean_of_three_nearest_matches_hand_computation() {
        // rows 0..3 observed; row 4 missing feature 1
        let m = matrix_from(&[
            vec![Some(1.0), Some(10.0)],
            vec![Some(2.0), Some(20.0)],
            vec![Some(3.0), Some(30.0)],
            vec![Some(9.0), Some(90.0)],
            vec![Some(2.1), None],
        ]);
        let train = [0usize, 1, 2, 3];
        let out = impute_knn(&m, 3, &train).unwrap();

        // exhaustive oracle: standardize feature 0 over train rows, rank
        // candidate distances, average the 3 nearest values of feature 1
        let xs = [1.0, 2.0, 3.0, 9.0];
        let mean = xs.iter().sum::<f64>() / 4.0;
        let sd = (xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0).sqrt();
        let z = |v: f64| (v - mean) / sd;
        let mut dists: Vec<(f64, usize)> = xs
            .iter()
            .enumerate()
            .map(|(r, &x)| ((z(2.1) - z(x)).abs(), r))
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let expect: f64 = dists[..3]
            .iter()
            .map(|&(_, r)| [10.0, 20.0, 30.0, 90.0][r])
            .sum::<f64>()
            / 3.0;
        assert!((out.get(4, 1) - expect).abs() < 1e-12);
        assert_eq!(expect, 20.0); // rows 1, 0, 2 are nearest
    }

    #[test]
    fn equidistant_tie_breaks_to_lower_row_index() {
        // rows 0 and 1 are equidistant from row 3; k=1 must pick row 0
        let m = matrix_from(&[
            vec![Some(1.0), Some(100.0)],
            vec![Some(3.0), Some(200.0)],
            vec![Some(10.0), Some(300.0)],
            vec![Some(2.0), None],
        ]);
        let out = impute_knn(&m, 1, &[0, 1, 2]).unwrap();
        assert_eq!(out.get(3, 1), 100.0);
    }

    #[test]
    fn neighbors_come_from_training_rows_only() {
        // row 2 (test) has an extreme value; it must not influence row 3
        let m = matrix_from(&[
            vec![Some(1.0), Some(10.0)],
            vec![Some(1.2), Some(12.0)],
            vec![Some(2.0), Some(9999.0)],
            vec![Some(1.1), None],
        ]);
        let out = impute_knn(&m, 2, &[0, 1]).unwrap();
        assert_eq!(out.get(3, 1), 11.0);
    }

    #[test]
    fn fallback_to_global_training_mean() {
        // row 0 shares no observed dimension with the rows that hold
        // feature 1, so its feature 1 falls back to the training mean
        let m = matrix_from(&[
            vec![Some(1.0), None, Some(2.0)],
            vec![None, Some(40.0), None],
            vec![None, Some(60.0), None],
            vec![Some(5.0), None, Some(6.0)],
        ]);
        let out = impute_knn(&m, 3, &[1, 2, 3]).unwrap();
        assert_eq!(out.get(0, 1), 50.0);
    }

    #[test]
    fn missing_everywhere_in_training_is_an_error() {
        let m = matrix_from(&[vec![Some(1.0), None], vec![Some(2.0), None]]);
        let err = impute_knn(&m, 3, &[0, 1]).unwrap_err();
        assert!(err.to_string().contains("no observed training value"));
    }

    #[test]
    fn mask_survives_imputation() {
        let m = matrix_from(&[vec![Some(1.0), Some(10.0)], vec![Some(2.0), None]]);
        let out = impute_knn(&m, 1, &[0, 1]).unwrap();
        assert!(out.is_missing(1, 1));
        assert!(!out.get(1, 1).is_nan());
        // and non-masked cells are bitwise identical
        assert_eq!(out.get(1, 0), 2.0);
    }
}
