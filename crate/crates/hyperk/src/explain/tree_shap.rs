//! Exact polynomial-time Shapley values for tree ensembles.
//!
//! Per tree, the recursion tracks the proportion of conditioned subsets
//! flowing hot (along x's path) and cold (cover-weighted) and unwinds
//! permutation weights at the leaves; repeated splits on one feature
//! along a path merge their fractions. The conditional expectation
//! definition is exactly the cover-descent rule `expected_value_conditioned`
//! in the brute-force module, which serves as this algorithm's oracle.
//!
//! Ensembles: boosted attributions are learning_rate-scaled sums over
//! trees in log-odds space; forest attributions are means over trees in
//! probability space.

use super::Attribution;
use crate::error::{Error, Result};
use crate::models::tree::{Node, Tree};
use crate::models::{Model, OutputSpace};

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: isize,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: isize) {
    let l = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i as f64 + 1.0) / (l as f64 + 1.0);
        path[i].pweight = zero_fraction * path[i].pweight * (l - i) as f64 / (l as f64 + 1.0);
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let l = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one_portion = path[l].pweight;
    for i in (0..l).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight =
                next_one_portion * (l as f64 + 1.0) / ((i as f64 + 1.0) * one_fraction);
            next_one_portion =
                tmp - path[i].pweight * zero_fraction * (l - i) as f64 / (l as f64 + 1.0);
        } else {
            path[i].pweight =
                path[i].pweight * (l as f64 + 1.0) / (zero_fraction * (l - i) as f64);
        }
    }
    for i in index..l {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Sum of pweights after unwinding `index`, without mutating the path.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let l = path.len() - 1;
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut total = 0.0;
    if one_fraction != 0.0 {
        let mut next_one_portion = path[l].pweight;
        for i in (0..l).rev() {
            let tmp = next_one_portion / ((i as f64 + 1.0) * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * (l - i) as f64;
        }
    } else {
        for i in (0..l).rev() {
            total += path[i].pweight / (zero_fraction * (l - i) as f64);
        }
    }
    total * (l as f64 + 1.0)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    row: &[f64],
    phi: &mut [f64],
    node_index: usize,
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: isize,
) {
    extend(&mut path, zero_fraction, one_fraction, feature);
    match &tree.nodes[node_index] {
        Node::Leaf { value, .. } => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                phi[path[i].feature as usize] +=
                    w * (path[i].one_fraction - path[i].zero_fraction) * value;
            }
        }
        Node::Internal {
            feature: split_feature,
            threshold,
            left,
            right,
            ..
        } => {
            let (hot, cold) = if row[*split_feature] < *threshold {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let total_cover = tree.nodes[*left].cover() + tree.nodes[*right].cover();
            let hot_fraction = tree.nodes[hot].cover() / total_cover;
            let cold_fraction = tree.nodes[cold].cover() / total_cover;

            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path
                .iter()
                .position(|e| e.feature == *split_feature as isize)
            {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                unwind(&mut path, k);
            }

            recurse(
                tree,
                row,
                phi,
                hot,
                path.clone(),
                incoming_zero * hot_fraction,
                incoming_one,
                *split_feature as isize,
            );
            recurse(
                tree,
                row,
                phi,
                cold,
                path,
                incoming_zero * cold_fraction,
                0.0,
                *split_feature as isize,
            );
        }
    }
}

/// Shapley values of one tree's cover-descent game; adds into `phi`.
pub fn tree_shap_single(tree: &Tree, row: &[f64], phi: &mut [f64]) {
    recurse(tree, row, phi, 0, Vec::new(), 1.0, 1.0, -1);
}

/// Exact attributions for a tree ensemble. Boosted models report in
/// log-odds, forests in probability space.
pub fn shap_tree(model: &Model, patient_id: &str, row: &[f64]) -> Result<Attribution> {
    let p = row.len();
    match model {
        Model::Boosted(m) => {
            let mut phi = vec![0.0; p];
            let mut base = m.base_score;
            for tree in &m.trees {
                let mut tree_phi = vec![0.0; p];
                tree_shap_single(tree, row, &mut tree_phi);
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
                tree_shap_single(tree, row, &mut tree_phi);
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
            "shap_tree applies to tree models; use shap_linear",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::Node;

    fn stump(feature: usize, threshold: f64, lv: f64, rv: f64, lc: f64, rc: f64) -> Tree {
        Tree {
            nodes: vec![
                Node::Internal {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    cover: lc + rc,
                },
                Node::Leaf {
                    value: lv,
                    cover: lc,
                },
                Node::Leaf {
                    value: rv,
                    cover: rc,
                },
            ],
        }
    }

    #[test]
    fn single_feature_stump_gets_full_surplus() {
        let tree = stump(0, 0.5, 0.2, 0.9, 6.0, 4.0);
        let expected = tree.expected_value();
        let mut phi = vec![0.0; 1];
        tree_shap_single(&tree, &[0.8], &mut phi);
        assert!((phi[0] - (0.9 - expected)).abs() < 1e-12);
        let mut phi = vec![0.0; 1];
        tree_shap_single(&tree, &[0.1], &mut phi);
        assert!((phi[0] - (0.2 - expected)).abs() < 1e-12);
    }

    #[test]
    fn unused_feature_gets_zero() {
        let tree = stump(0, 0.5, 0.2, 0.9, 6.0, 4.0);
        let mut phi = vec![0.0; 3];
        tree_shap_single(&tree, &[0.8, 123.0, -5.0], &mut phi);
        assert_eq!(phi[1], 0.0);
        assert_eq!(phi[2], 0.0);
    }

    #[test]
    fn local_accuracy_on_a_depth_two_tree() {
        // depth-2 over 2 features
        let tree = Tree {
            nodes: vec![
                Node::Internal {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    cover: 10.0,
                },
                Node::Internal {
                    feature: 1,
                    threshold: 1.0,
                    left: 3,
                    right: 4,
                    cover: 6.0,
                },
                Node::Leaf {
                    value: 3.0,
                    cover: 4.0,
                },
                Node::Leaf {
                    value: -1.0,
                    cover: 2.0,
                },
                Node::Leaf {
                    value: 1.0,
                    cover: 4.0,
                },
            ],
        };
        for row in [[-1.0, 0.5], [-1.0, 2.0], [1.0, 0.0]] {
            let mut phi = vec![0.0; 2];
            tree_shap_single(&tree, &row, &mut phi);
            let f = tree.predict(&row);
            let e = tree.expected_value();
            assert!(
                (phi.iter().sum::<f64>() - (f - e)).abs() < 1e-12,
                "row {row:?}"
            );
        }
    }

    #[test]
    fn boosted_attribution_is_scaled_sum_of_trees() {
        use crate::models::{BoostedModel, Model};
        let t1 = stump(0, 0.5, -1.0, 1.0, 5.0, 5.0);
        let t2 = stump(1, 0.0, 0.5, -0.5, 3.0, 7.0);
        let model = Model::Boosted(BoostedModel {
            base_score: 0.3,
            trees: vec![t1.clone(), t2.clone()],
            learning_rate: 0.4,
            l2_leaf_lambda: 1.0,
            max_depth: 1,
            loss_trace: vec![],
        });
        let row = [0.7, -0.2];
        let a = shap_tree(&model, "p", &row).unwrap();
        let mut phi1 = vec![0.0; 2];
        tree_shap_single(&t1, &row, &mut phi1);
        let mut phi2 = vec![0.0; 2];
        tree_shap_single(&t2, &row, &mut phi2);
        for j in 0..2 {
            assert!((a.phi[j] - 0.4 * (phi1[j] + phi2[j])).abs() < 1e-12);
        }
        assert_eq!(a.output_space, OutputSpace::LogOdds);
        let margin = model.margin_row(&row);
        assert!(a.local_accuracy_residual(margin) < 1e-12);
    }

    #[test]
    fn forest_attribution_is_mean_of_trees() {
        use crate::models::{ForestModel, Model};
        let t1 = stump(0, 0.5, 0.1, 0.9, 5.0, 5.0);
        let t2 = stump(0, 0.2, 0.3, 0.7, 2.0, 8.0);
        let model = Model::Forest(ForestModel {
            trees: vec![t1, t2],
            n_estimators: 2,
            max_depth: 1,
            feature_subsample: 1,
            seed: 0,
        });
        let row = [0.35];
        let a = shap_tree(&model, "p", &row).unwrap();
        assert_eq!(a.output_space, OutputSpace::Probability);
        let margin = model.margin_row(&row);
        assert!(a.local_accuracy_residual(margin) < 1e-12);
    }
}
