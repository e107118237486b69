//! Repeated stratified 60/40 shuffle splits with derived seeds.

use crate::error::{Error, Result};
use crate::seed::derive_indexed_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const TRAIN_FRACTION: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub repeat_index: usize,
    pub seed: u64,
    /// Row indices into the cohort's included-row space.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// `n_repeats` independent stratified splits: per class, a seeded shuffle
/// sends round(0.6 * n_class) rows to train and the rest to test.
pub fn make_splits(y: &[u8], n_repeats: usize, seed: u64) -> Result<Vec<SplitPlan>> {
    let n_pos = y.iter().filter(|&&v| v == 1).count();
    let n_neg = y.len() - n_pos;
    if n_pos < 2 || n_neg < 2 {
        return Err(Error::config(format!(
            "make_splits needs >= 2 of each class (got {n_pos} positives, {n_neg} negatives)"
        )));
    }
    (0..n_repeats)
        .map(|r| {
            let split_seed = derive_indexed_seed(seed, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for class in [0u8, 1u8] {
                let mut members: Vec<usize> =
                    (0..y.len()).filter(|&i| y[i] == class).collect();
                for j in (1..members.len()).rev() {
                    let k = rng.random_range(0..=j);
                    members.swap(j, k);
                }
                let n_train = ((members.len() as f64 * TRAIN_FRACTION).round() as usize)
                    .clamp(1, members.len() - 1);
                train.extend_from_slice(&members[..n_train]);
                test.extend_from_slice(&members[n_train..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Ok(SplitPlan {
                repeat_index: r,
                seed: split_seed,
                train_rows: train,
                test_rows: test,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize, n_pos: usize) -> Vec<u8> {
        (0..n).map(|i| (i < n_pos) as u8).collect()
    }

    #[test]
    fn sixty_forty_with_stratification() {
        let y = labels(100, 10);
        let plans = make_splits(&y, 4, 7).unwrap();
        assert_eq!(plans.len(), 4);
        for plan in &plans {
            assert_eq!(plan.train_rows.len(), 60);
            assert_eq!(plan.test_rows.len(), 40);
            let train_pos = plan.train_rows.iter().filter(|&&i| y[i] == 1).count();
            let test_pos = plan.test_rows.iter().filter(|&&i| y[i] == 1).count();
            assert_eq!(train_pos, 6);
            assert_eq!(test_pos, 4);
        }
    }

    #[test]
    fn deterministic_and_repeat_distinct() {
        let y = labels(50, 8);
        let a = make_splits(&y, 3, 42).unwrap();
        let b = make_splits(&y, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].train_rows, a[1].train_rows);
        let c = make_splits(&y, 3, 43).unwrap();
        assert_ne!(a[0].train_rows, c[0].train_rows);
    }

    #[test]
    fn disjoint_and_covering_on_random_cohorts() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for trial in 0..1000 {
            let n = rng.random_range(6..60);
            let n_pos = rng.random_range(2..(n - 2).max(3).min(n - 1));
            let y = labels(n, n_pos);
            let plans = make_splits(&y, 2, trial).unwrap();
            for plan in plans {
                let mut seen = vec![false; n];
                for &i in plan.train_rows.iter().chain(&plan.test_rows) {
                    assert!(!seen[i], "row {i} appears twice");
                    seen[i] = true;
                }
                assert!(seen.iter().all(|&s| s), "some row missing");
            }
        }
    }

    #[test]
    fn degenerate_classes_rejected() {
        assert!(make_splits(&labels(10, 1), 2, 0).is_err());
        assert!(make_splits(&labels(10, 9), 2, 0).is_err());
    }
}
