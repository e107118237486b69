//! Binary decision-tree structure shared by the forest and the boosted
//! ensemble. Internal nodes route `x[feature] < threshold` to the left
//! child; every node carries its cover (sum of training sample weights
//! that reached it), which drives conditional expectations in the
//! attribution engine.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Internal { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// A trained tree; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn single_leaf(value: f64, cover: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { value, cover }],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Cover-weighted mean of leaf values: E[f(X)] under the training
    /// distribution the covers encode.
    pub fn expected_value(&self) -> f64 {
        self.expected_from(0)
    }

    fn expected_from(&self, idx: usize) -> f64 {
        match &self.nodes[idx] {
            Node::Leaf { value, .. } => *value,
            Node::Internal {
                left, right, cover, ..
            } => {
                let cl = self.nodes[*left].cover();
                let cr = self.nodes[*right].cover();
                debug_assert!(*cover > 0.0 && cl + cr > 0.0);
                (cl * self.expected_from(*left) + cr * self.expected_from(*right)) / (cl + cr)
            }
        }
    }

    pub fn max_depth(&self) -> usize {
        self.depth_from(0)
    }

    fn depth_from(&self, idx: usize) -> usize {
        match &self.nodes[idx] {
            Node::Leaf { .. } => 0,
            Node::Internal { left, right, .. } => {
                1 + self.depth_from(*left).max(self.depth_from(*right))
            }
        }
    }

    /// cover(parent) == cover(left) + cover(right) for every internal node.
    pub fn covers_consistent(&self, tol: f64) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Leaf { .. } => true,
            Node::Internal {
                left, right, cover, ..
            } => {
                let sum = self.nodes[*left].cover() + self.nodes[*right].cover();
                (sum - cover).abs() <= tol * cover.abs().max(1.0)
            }
        })
    }

    pub fn features_used(&self) -> Vec<usize> {
        let mut feats: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        feats.sort_unstable();
        feats.dedup();
        feats
    }
}

/// Midpoint split candidates between consecutive distinct sorted values.
/// Returns thresholds in ascending order.
pub(crate) fn midpoints(sorted_values: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in sorted_values.windows(2) {
        if w[1] > w[0] {
            let mid = 0.5 * (w[0] + w[1]);
            // guard against midpoint collapsing onto an endpoint
            if mid > w[0] && mid <= w[1] {
                out.push(mid);
            }
        }
    }
    out
}
