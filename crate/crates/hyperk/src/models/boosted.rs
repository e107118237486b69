//! Second-order gradient-boosted trees with logistic loss.
//!
//! Stagewise Newton boosting: per stage, gradients g = w(p - y) and
//! hessians h = w p(1-p) drive exact greedy splits with gain
//! (1/2)[G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H_L+H_R+lambda)]
//! and leaf values -G/(H+lambda). The model score is
//! sigmoid(base_score + learning_rate * sum of tree outputs); the base
//! score is the log-odds of the weighted training prevalence. Node covers
//! store sums of sample weights (not hessians) for the attribution engine.

use super::logistic::sigmoid;
use super::tree::{midpoints, Node, Tree};
use super::ClassWeights;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostedParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_leaf_lambda: f64,
}

impl Default for BoostedParams {
    fn default() -> Self {
        BoostedParams {
            n_estimators: 150,
            max_depth: 4,
            learning_rate: 0.15,
            l2_leaf_lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub l2_leaf_lambda: f64,
    pub max_depth: usize,
    /// Weighted training log-loss after each stage.
    pub loss_trace: Vec<f64>,
}

impl BoostedModel {
    /// Log-odds margin.
    pub fn margin_row(&self, row: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate
                * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin_row(row))
    }
}

struct BoostGrower<'a> {
    x: &'a FeatureMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    weights: &'a [f64],
    lambda: f64,
    max_depth: usize,
    nodes: Vec<Node>,
}

impl<'a> BoostGrower<'a> {
    fn grow(&mut self, indices: &[usize], depth: usize) -> usize {
        let g: f64 = indices.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = indices.iter().map(|&i| self.hess[i]).sum();
        let cover: f64 = indices.iter().map(|&i| self.weights[i]).sum();
        let leaf_value = -g / (h + self.lambda);

        if depth >= self.max_depth || indices.len() < 2 {
            self.nodes.push(Node::Leaf {
                value: leaf_value,
                cover,
            });
            return self.nodes.len() - 1;
        }
        let best = self.best_split(indices, g, h);
        let (feature, threshold) = match best {
            Some(s) => s,
            None => {
                self.nodes.push(Node::Leaf {
                    value: leaf_value,
                    cover,
                });
                return self.nodes.len() - 1;
            }
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.x.get(i, feature) < threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: leaf_value,
            cover,
        });
        let left = self.grow(&left_idx, depth + 1);
        let right = self.grow(&right_idx, depth + 1);
        self.nodes[slot] = Node::Internal {
            feature,
            threshold,
            left,
            right,
            cover,
        };
        slot
    }

    fn best_split(&self, indices: &[usize], g_total: f64, h_total: f64) -> Option<(usize, f64)> {
        let lambda = self.lambda;
        let parent_score = g_total * g_total / (h_total + lambda);
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in 0..self.x.n_features() {
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
            let mut gl = 0.0;
            let mut hl = 0.0;
            let mut cursor = 0usize;
            for threshold in thresholds {
                while cursor < sorted.len() && sorted[cursor].0 < threshold {
                    let i = sorted[cursor].1;
                    gl += self.grad[i];
                    hl += self.hess[i];
                    cursor += 1;
                }
                let gr = g_total - gl;
                let hr = h_total - hl;
                if cursor == 0 || cursor == sorted.len() {
                    continue;
                }
                let gain = 0.5
                    * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score);
                let better = match best {
                    None => gain > 1e-12,
                    Some((bg, bf, bt)) => {
                        gain > bg + 1e-12
                            || ((gain - bg).abs() <= 1e-12 && (feature, threshold) < (bf, bt))
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

pub fn train_boosted(
    x: &FeatureMatrix,
    y: &[u8],
    class_weights: &ClassWeights,
    params: &BoostedParams,
) -> Result<BoostedModel> {
    if x.n_rows() != y.len() {
        return Err(Error::config(format!(
            "train_boosted: {} rows vs {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::config(format!(
            "train_boosted: learning_rate {} outside (0, 1]",
            params.learning_rate
        )));
    }
    if params.max_depth < 1 {
        return Err(Error::config("train_boosted: max_depth must be >= 1"));
    }
    let n = x.n_rows();
    let weights: Vec<f64> = y.iter().map(|&yi| class_weights.of(yi)).collect();
    let w_pos: f64 = weights
        .iter()
        .zip(y)
        .filter(|&(_, &yi)| yi == 1)
        .map(|(w, _)| w)
        .sum();
    let w_total: f64 = weights.iter().sum();
    let w_neg = w_total - w_pos;
    if w_pos <= 0.0 || w_neg <= 0.0 {
        return Err(Error::config(
            "train_boosted: both classes must be present",
        ));
    }
    let base_score = (w_pos / w_neg).ln();

    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut loss_trace = Vec::with_capacity(params.n_estimators);
    let all_indices: Vec<usize> = (0..n).collect();

    for stage in 0..params.n_estimators {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = weights[i] * (p - y[i] as f64);
            hess[i] = weights[i] * p * (1.0 - p);
            if !grad[i].is_finite() || !hess[i].is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite gradient at stage {stage}, row {i}"
                )));
            }
        }
        let mut grower = BoostGrower {
            x,
            grad: &grad,
            hess: &hess,
            weights: &weights,
            lambda: params.l2_leaf_lambda,
            max_depth: params.max_depth,
            nodes: Vec::new(),
        };
        grower.grow(&all_indices, 0);
        let tree = Tree {
            nodes: grower.nodes,
        };
        for i in 0..n {
            margins[i] += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);

        let loss: f64 = (0..n)
            .map(|i| {
                let p = sigmoid(margins[i]).clamp(1e-12, 1.0 - 1e-12);
                let yi = y[i] as f64;
                -weights[i] * (yi * p.ln() + (1.0 - yi) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / w_total;
        loss_trace.push(loss);
    }

    Ok(BoostedModel {
        base_score,
        trees,
        learning_rate: params.learning_rate,
        l2_leaf_lambda: params.l2_leaf_lambda,
        max_depth: params.max_depth,
        loss_trace,
    })
}
