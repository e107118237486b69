//! Random forest classifier with class-weighted Gini splits.
//!
//! Each tree fits a bootstrap sample; splits pick the best weighted-Gini
//! decrease over a random feature subset of size ceil(sqrt(p)); leaves
//! store the weighted positive fraction and the ensemble probability is
//! the arithmetic mean of tree probabilities.

use super::tree::{midpoints, Node, Tree};
use super::ClassWeights;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::derive_indexed_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    /// Features considered per split; `None` = ceil(sqrt(p)).
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 200,
            max_depth: 8,
            feature_subsample: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub feature_subsample: usize,
    pub seed: u64,
}

impl ForestModel {
    pub fn proba_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }
}

struct TreeGrower<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    weights: &'a [f64],
    max_depth: usize,
    n_candidates: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeGrower<'a> {
    fn grow(&mut self, indices: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let w_total: f64 = indices.iter().map(|&i| self.weights[i]).sum();
        let w_pos: f64 = indices
            .iter()
            .filter(|&&i| self.y[i] == 1)
            .map(|&i| self.weights[i])
            .sum();
        let leaf_value = if w_total > 0.0 { w_pos / w_total } else { 0.5 };

        let pure = indices.iter().all(|&i| self.y[i] == self.y[indices[0]]);
        if depth >= self.max_depth || pure || indices.len() < 2 {
            self.nodes.push(Node::Leaf {
                value: leaf_value,
                cover: w_total,
            });
            return self.nodes.len() - 1;
        }

        let candidates = self.sample_features(rng);
        let best = self.best_split(indices, &candidates, w_total, w_pos);
        let (feature, threshold) = match best {
            Some(s) => s,
            None => {
                self.nodes.push(Node::Leaf {
                    value: leaf_value,
                    cover: w_total,
                });
                return self.nodes.len() - 1;
            }
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.x.get(i, feature) < threshold);
        debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());

        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: leaf_value,
            cover: w_total,
        }); // placeholder
        let left = self.grow(&left_idx, depth + 1, rng);
        let right = self.grow(&right_idx, depth + 1, rng);
        self.nodes[slot] = Node::Internal {
            feature,
            threshold,
            left,
            right,
            cover: w_total,
        };
        slot
    }

    /// Distinct feature indices, sorted ascending so the gain tie-break
    /// (lower feature index first) is deterministic.
    fn sample_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let p = self.x.n_features();
        if self.n_candidates >= p {
            return (0..p).collect();
        }
        let mut pool: Vec<usize> = (0..p).collect();
        for j in 0..self.n_candidates {
            let k = rng.random_range(j..p);
            pool.swap(j, k);
        }
        let mut chosen = pool[..self.n_candidates].to_vec();
        chosen.sort_unstable();
        chosen
    }

    /// Weighted-Gini gain: W*G(node) - W_L*G(L) - W_R*G(R), maximized.
    fn best_split(
        &self,
        indices: &[usize],
        candidates: &[usize],
        w_total: f64,
        w_pos: f64,
    ) -> Option<(usize, f64)> {
        let parent_impurity = weighted_gini(w_pos, w_total);
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        for &feature in candidates {
            let mut sorted: Vec<(f64, usize)> = indices
                .iter()
                .map(|&i| (self.x.get(i, feature), i))
                .collect();
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let values: Vec<f64> = sorted.iter().map(|&(v, _)| v).collect();
            let thresholds = midpoints(&values);
            if thresholds.is_empty() {
                continue;
            }
            let mut wl = 0.0;
            let mut wl_pos = 0.0;
            let mut cursor = 0usize;
            for threshold in thresholds {
                while cursor < sorted.len() && sorted[cursor].0 < threshold {
                    let i = sorted[cursor].1;
                    wl += self.weights[i];
                    if self.y[i] == 1 {
                        wl_pos += self.weights[i];
                    }
                    cursor += 1;
                }
                let wr = w_total - wl;
                let wr_pos = w_pos - wl_pos;
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let gain =
                    parent_impurity - weighted_gini(wl_pos, wl) - weighted_gini(wr_pos, wr);
                let better = match best {
                    None => gain > 1e-12,
                    Some((bg, bf, bt)) => {
                        gain > bg + 1e-12
                            || ((gain - bg).abs() <= 1e-12
                                && (feature, threshold) < (bf, bt))
                    }
                };
                if better {
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// W * gini = W * (1 - p^2 - q^2), expressed to avoid dividing by W twice.
fn weighted_gini(w_pos: f64, w_total: f64) -> f64 {
    if w_total <= 0.0 {
        return 0.0;
    }
    let p = w_pos / w_total;
    w_total * (1.0 - p * p - (1.0 - p) * (1.0 - p))
}

pub fn train_forest(
    x: &FeatureMatrix,
    y: &[u8],
    class_weights: &ClassWeights,
    params: &ForestParams,
) -> Result<ForestModel> {
    if x.n_rows() != y.len() {
        return Err(Error::config(format!(
            "train_forest: {} rows vs {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if params.n_estimators < 1 || params.max_depth < 1 {
        return Err(Error::config(
            "train_forest: n_estimators and max_depth must be >= 1",
        ));
    }
    let n = x.n_rows();
    let p = x.n_features();
    let n_candidates = params
        .feature_subsample
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);
    let weights: Vec<f64> = y.iter().map(|&yi| class_weights.of(yi)).collect();

    let trees: Vec<Tree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_indexed_seed(params.seed, t as u64));
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut grower = TreeGrower {
                x,
                y,
                weights: &weights,
                max_depth: params.max_depth,
                n_candidates,
                nodes: Vec::new(),
            };
            grower.grow(&indices, 0, &mut rng);
            Tree {
                nodes: grower.nodes,
            }
        })
        .collect();

    Ok(ForestModel {
        trees,
        n_estimators: params.n_estimators,
        max_depth: params.max_depth,
        feature_subsample: n_candidates,
        seed: params.seed,
    })
}
