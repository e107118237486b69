//! ROC AUC as pairwise concordance (Mann-Whitney), ties counted one half.
//!
//! Computed by sorting once and walking tie groups, so every term is an
//! exact multiple of 0.5 and the result matches brute-force pair
//! enumeration bit-for-bit on realistic sizes.

use crate::error::{Error, Result};

/// Probability that a random positive outscores a random negative.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::config(format!(
            "auc_roc: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::config(
            "auc_roc needs at least one positive and one negative",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut concordant = 0.0f64; // exact: sums of integers and halves
    let mut neg_below = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut pos_in_group = 0.0f64;
        let mut neg_in_group = 0.0f64;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                pos_in_group += 1.0;
            } else {
                neg_in_group += 1.0;
            }
            j += 1;
        }
        concordant += pos_in_group * neg_below + 0.5 * pos_in_group * neg_in_group;
        neg_below += neg_in_group;
        i = j;
    }
    Ok(concordant / (n_pos as f64 * n_neg as f64))
}

/// Points of the ROC curve as (false_positive_rate, true_positive_rate,
/// threshold), threshold descending, for external plotting.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64, f64)>> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::config(
            "roc_curve needs at least one positive and one negative",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut points = vec![(0.0, 0.0, f64::INFINITY)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64, threshold));
    }
    Ok(points)
}
