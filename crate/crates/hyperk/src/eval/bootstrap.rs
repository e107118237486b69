//! Confidence intervals for AUC: percentile over per-split values, and a
//! stratified bootstrap of pooled test scores (the reported interval —
//! stable even with only four splits).

use super::auc::auc_roc;
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Empirical quantile by rank `ceil(p * n)` (1-based), clamped to the
/// sample: with n = 1000 and level 0.95, the endpoints are order
/// statistics 25 and 975.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Percentile interval over per-split AUCs.
pub fn split_percentile_interval(per_split_aucs: &[f64], level: f64) -> Result<(f64, f64)> {
    if per_split_aucs.len() < 2 {
        return Err(Error::config(
            "confidence interval needs at least 2 split AUCs",
        ));
    }
    let mut sorted = per_split_aucs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = 1.0 - level;
    Ok((
        percentile(&sorted, alpha / 2.0),
        percentile(&sorted, 1.0 - alpha / 2.0),
    ))
}

/// Percentile interval of AUC over stratified bootstrap resamples of the
/// pooled test scores (positives and negatives resampled separately, so
/// every resample keeps both classes).
pub fn bootstrap_auc_interval(
    scores: &[f64],
    labels: &[u8],
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 0)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::config(
            "bootstrap interval needs both classes in the pooled scores",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut aucs = Vec::with_capacity(n_resamples);
    let mut resample_scores = Vec::with_capacity(scores.len());
    let mut resample_labels = Vec::with_capacity(scores.len());
    for _ in 0..n_resamples {
        resample_scores.clear();
        resample_labels.clear();
        for _ in 0..pos.len() {
            resample_scores.push(pos[rng.random_range(0..pos.len())]);
            resample_labels.push(1u8);
        }
        for _ in 0..neg.len() {
            resample_scores.push(neg[rng.random_range(0..neg.len())]);
            resample_labels.push(0u8);
        }
        aucs.push(auc_roc(&resample_scores, &resample_labels)?);
    }
    aucs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = 1.0 - level;
    Ok((
        percentile(&aucs, alpha / 2.0),
        percentile(&aucs, 1.0 - alpha / 2.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_rank_convention() {
        let sorted: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(percentile(&sorted, 0.025), 25.0);
        assert_eq!(percentile(&sorted, 0.975), 975.0);
        assert_eq!(percentile(&sorted, 1.0), 1000.0);
        assert_eq!(percentile(&sorted, 0.0), 1.0);
    }

    #[test]
    fn identical_split_aucs_collapse_the_interval() {
        let (lo, hi) = split_percentile_interval(&[0.8, 0.8, 0.8, 0.8], 0.95).unwrap();
        assert_eq!((lo, hi), (0.8, 0.8));
        assert!(split_percentile_interval(&[0.8], 0.95).is_err());
    }

    #[test]
    fn bootstrap_interval_brackets_the_point_estimate() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 400;
        let labels: Vec<u8> = (0..n).map(|i| (i % 4 == 0) as u8).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&y| y as f64 * 0.8 + rng.random::<f64>())
            .collect();
        let auc = auc_roc(&scores, &labels).unwrap();
        let (lo, hi) = bootstrap_auc_interval(&scores, &labels, 1000, 0.95, 1).unwrap();
        assert!(lo < auc && auc < hi, "({lo}, {hi}) vs {auc}");
        assert!(hi - lo < 0.25);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 5 == 0) as u8).collect();
        let scores: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = bootstrap_auc_interval(&scores, &labels, 500, 0.95, 4).unwrap();
        let b = bootstrap_auc_interval(&scores, &labels, 500, 0.95, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interval_roughly_symmetric_under_symmetric_noise() {
        // repeated-seed simulation: with symmetric score noise the
        // interval should center on the mean AUC
        use rand::Rng;
        use rand::SeedableRng;
        let mut asym_total = 0.0;
        let reps = 10;
        for rep in 0..reps {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
            let n = 600;
            let labels: Vec<u8> = (0..n).map(|i| (i % 2 == 0) as u8).collect();
            let scores: Vec<f64> = labels
                .iter()
                .map(|&y| 0.3 * y as f64 + rng.random::<f64>())
                .collect();
            let auc = auc_roc(&scores, &labels).unwrap();
            let (lo, hi) = bootstrap_auc_interval(&scores, &labels, 1000, 0.95, rep).unwrap();
            asym_total += ((hi - auc) - (auc - lo)).abs();
        }
        let mean_asym = asym_total / reps as f64;
        assert!(mean_asym < 0.02, "mean asymmetry {mean_asym}");
    }
}
