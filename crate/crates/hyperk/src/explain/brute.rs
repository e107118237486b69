//! Brute-force Shapley values by subset enumeration — the oracle for the
//! fast tree algorithm, sharing its cover-descent conditioning exactly.
//!
//! v(S) descends the tree: conditioned features follow x's branch, the
//! rest split into both children weighted by cover. phi_j sums
//! |S|!(M-|S|-1)!/M! [v(S+j) - v(S)] over subsets S of the other
//! features. Refuses more than 15 features.

use super::Attribution;
use crate::error::{Error, Result};
use crate::models::tree::{Node, Tree};
use crate::models::{Model, OutputSpace};

pub const MAX_BRUTE_FEATURES: usize = 15;

/// Cover-descent conditional expectation: E[f(x_S, X_rest)] with `subset`
/// a bitmask over feature indices.
pub fn expected_value_conditioned(tree: &Tree, row: &[f64], subset: u64) -> f64 {
    descend(tree, row, subset, 0)
}

fn descend(tree: &Tree, row: &[f64], subset: u64, node: usize) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => *value,
        Node::Internal {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            if subset & (1u64 << feature) != 0 {
                let next = if row[*feature] < *threshold {
                    *left
                } else {
                    *right
                };
                descend(tree, row, subset, next)
            } else {
                let cl = tree.nodes[*left].cover();
                let cr = tree.nodes[*right].cover();
                (cl * descend(tree, row, subset, *left) + cr * descend(tree, row, subset, *right))
                    / (cl + cr)
            }
        }
    }
}

/// Shapley values of one tree by full subset enumeration over `n_features`
/// players; adds into `phi`.
fn brute_single(tree: &Tree, row: &[f64], n_features: usize, phi: &mut [f64]) {
    let m = n_features;
    // v(S) for every subset
    let n_subsets = 1usize << m;
    let mut v = vec![0.0; n_subsets];
    for (s, slot) in v.iter_mut().enumerate() {
        *slot = expected_value_conditioned(tree, row, s as u64);
    }
    // factorial weights w(|S|) = |S|! (m - |S| - 1)! / m!
    let mut factorial = vec![1.0f64; m + 1];
    for i in 1..=m {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..m)
        .map(|s| factorial[s] * factorial[m - s - 1] / factorial[m])
        .collect();

    for j in 0..m {
        let bit = 1usize << j;
        let mut total = 0.0;
        for s in 0..n_subsets {
            if s & bit != 0 {
                continue;
            }
            let size = (s as u64).count_ones() as usize;
            total += weight[size] * (v[s | bit] - v[s]);
        }
        phi[j] += total;
    }
}

/// Exact Shapley attribution by enumeration, combined across the ensemble
/// the same way as the fast path (scaled sum for boosted, mean for
/// forest).
pub fn shap_brute_force(model: &Model, patient_id: &str, row: &[f64]) -> Result<Attribution> {
    let p = row.len();
    if p > MAX_BRUTE_FEATURES {
        return Err(Error::config(format!(
            "shap_brute_force refuses {p} features (max {MAX_BRUTE_FEATURES}): 2^{p} subsets"
        )));
    }
    match model {
        Model::Boosted(m) => {
            let mut phi = vec![0.0; p];
            let mut base = m.base_score;
            for tree in &m.trees {
                let mut tree_phi = vec![0.0; p];
                brute_single(tree, row, p, &mut tree_phi);
                for (acc, v) in phi.iter_mut().zip(&tree_phi) {
                    *acc += m.learning_rate * v;
                }
                base += m.learning_rate * tree.expected_value();
            }
            Ok(Attribution {
                patient_id: patient_id.to_string(),
                base_value: base,
                phi,
                output_space: OutputSpace::LogOdds,
            })
        }
        Model::Forest(m) => {
            let n_trees = m.trees.len() as f64;
            let mut phi = vec![0.0; p];
            let mut base = 0.0;
            for tree in &m.trees {
                let mut tree_phi = vec![0.0; p];
                brute_single(tree, row, p, &mut tree_phi);
                for (acc, v) in phi.iter_mut().zip(&tree_phi) {
                    *acc += v / n_trees;
                }
                base += tree.expected_value() / n_trees;
            }
            Ok(Attribution {
                patient_id: patient_id.to_string(),
                base_value: base,
                phi,
                output_space: OutputSpace::Probability,
            })
        }
        Model::Logistic(_) => Err(Error::config(
            "shap_brute_force applies to tree models",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::tree_shap_single;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stump() -> Tree {
        Tree {
            nodes: vec![
                Node::Internal {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    cover: 10.0,
                },
                Node::Leaf {
                    value: 0.2,
                    cover: 6.0,
                },
                Node::Leaf {
                    value: 0.9,
                    cover: 4.0,
                },
            ],
        }
    }

    #[test]
    fn one_feature_gets_f_minus_expectation() {
        let tree = stump();
        let mut phi = vec![0.0; 1];
        brute_single(&tree, &[0.9], 1, &mut phi);
        let expect = tree.predict(&[0.9]) - tree.expected_value();
        assert!((phi[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn two_feature_shapley_formula_by_hand() {
        // phi_0 = 1/2 [v({0}) - v({})] + 1/2 [v({0,1}) - v({1})]
        let tree = Tree {
            nodes: vec![
                Node::Internal {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    cover: 8.0,
                },
                Node::Internal {
                    feature: 1,
                    threshold: 0.0,
                    left: 3,
                    right: 4,
                    cover: 5.0,
                },
                Node::Leaf {
                    value: 2.0,
                    cover: 3.0,
                },
                Node::Leaf {
                    value: -1.0,
                    cover: 2.0,
                },
                Node::Leaf {
                    value: 4.0,
                    cover: 3.0,
                },
            ],
        };
        let row = [-0.5, 0.5];
        let v = |s: u64| expected_value_conditioned(&tree, &row, s);
        let phi0_expect = 0.5 * (v(0b01) - v(0b00)) + 0.5 * (v(0b11) - v(0b10));
        let phi1_expect = 0.5 * (v(0b10) - v(0b00)) + 0.5 * (v(0b11) - v(0b01));
        let mut phi = vec![0.0; 2];
        brute_single(&tree, &row, 2, &mut phi);
        assert!((phi[0] - phi0_expect).abs() < 1e-12);
        assert!((phi[1] - phi1_expect).abs() < 1e-12);
    }

    /// Random tree with possibly repeated features along a path.
    pub(crate) fn random_tree(
        rng: &mut ChaCha8Rng,
        n_features: usize,
        depth: usize,
    ) -> Tree {
        fn grow(
            rng: &mut ChaCha8Rng,
            nodes: &mut Vec<Node>,
            n_features: usize,
            depth: usize,
        ) -> (usize, f64) {
            if depth == 0 || rng.random::<f64>() < 0.25 {
                let cover = 0.5 + rng.random::<f64>() * 9.5;
                nodes.push(Node::Leaf {
                    value: rng.random::<f64>() * 4.0 - 2.0,
                    cover,
                });
                return (nodes.len() - 1, cover);
            }
            let slot = nodes.len();
            nodes.push(Node::Leaf {
                value: 0.0,
                cover: 0.0,
            });
            let (left, cl) = grow(rng, nodes, n_features, depth - 1);
            let (right, cr) = grow(rng, nodes, n_features, depth - 1);
            nodes[slot] = Node::Internal {
                feature: rng.random_range(0..n_features),
                threshold: rng.random::<f64>() * 2.0 - 1.0,
                left,
                right,
                cover: cl + cr,
            };
            (slot, cl + cr)
        }
        let mut nodes = Vec::new();
        grow(rng, &mut nodes, n_features, depth);
        Tree { nodes }
    }

    #[test]
    fn fast_path_matches_brute_force_on_random_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..40 {
            let n_features = rng.random_range(1..9);
            let depth = rng.random_range(1..5);
            let tree = random_tree(&mut rng, n_features, depth);
            let row: Vec<f64> = (0..n_features)
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect();
            let mut fast = vec![0.0; n_features];
            tree_shap_single(&tree, &row, &mut fast);
            let mut brute = vec![0.0; n_features];
            brute_single(&tree, &row, n_features, &mut brute);
            for j in 0..n_features {
                assert!(
                    (fast[j] - brute[j]).abs() < 1e-9,
                    "trial {trial} feature {j}: fast {} vs brute {}",
                    fast[j],
                    brute[j]
                );
            }
        }
    }

    #[test]
    fn too_many_features_refused() {
        use crate::models::ForestModel;
        let model = Model::Forest(ForestModel {
            trees: vec![stump()],
            n_estimators: 1,
            max_depth: 1,
            feature_subsample: 1,
            seed: 0,
        });
        let row = vec![0.0; 16];
        assert!(shap_brute_force(&model, "p", &row).is_err());
    }
}
