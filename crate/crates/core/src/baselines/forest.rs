//! Random forest of Gini-impurity decision trees.
//!
//! Each tree is fit on a bootstrap resample. Randomness is derived per
//! node from `(tree seed, node id)` with heap numbering (root 1, children
//! `2i` and `2i + 1`), so a tree grown with a larger `max_depth` refines the
//! shallower tree instead of diverging from it.

use super::features::{Sample, FEATURE_LEN};
use super::{splitmix64, BaselineError};
use crate::model::BehaviourClass;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const K: usize = BehaviourClass::COUNT;
// Heap ids are u64; deeper trees would overflow them.
const MAX_SUPPORTED_DEPTH: usize = 62;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 12,
            min_leaf: 1,
            // ⌊√34⌋
            features_per_split: 5,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: [u32; K],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    fn leaf(&self, x: &[f64; FEATURE_LEN]) -> &[u32; K] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64; FEATURE_LEN]) -> BehaviourClass {
        argmax_class(self.leaf(x))
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[u32; K]> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { counts } => Some(counts),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Majority vote of the trees; ties go to the earlier class (S < L < O).
    pub fn predict(&self, x: &[f64; FEATURE_LEN]) -> BehaviourClass {
        let mut votes = [0u32; K];
        for t in &self.trees {
            votes[t.predict(x).index()] += 1;
        }
        argmax_class(&votes)
    }
}

/// First class with the highest count.
fn argmax_class(counts: &[u32; K]) -> BehaviourClass {
    let mut best = 0;
    for i in 1..K {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    BehaviourClass::ALL[best]
}

fn tree_seed(seed: u64, tree: usize) -> u64 {
    splitmix64(seed ^ splitmix64(tree as u64 + 1))
}

fn node_rng(tree_seed: u64, node_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
    rng.set_stream(node_id);
    rng
}

pub fn train_forest(data: &[Sample], params: &ForestParams) -> Result<ForestModel, BaselineError> {
    if data.len() < 2 {
        return Err(BaselineError::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    if params.n_trees == 0
        || params.min_leaf == 0
        || params.features_per_split == 0
        || params.features_per_split > FEATURE_LEN
        || params.max_depth > MAX_SUPPORTED_DEPTH
    {
        return Err(BaselineError::InvalidParams(format!("{params:?}")));
    }
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let seed = tree_seed(params.seed, t);
            let rows: Vec<usize> = if params.bootstrap {
                // stream 0 is reserved for the resample; nodes start at 1
                let mut rng = node_rng(seed, 0);
                (0..data.len()).map(|_| rng.random_range(0..data.len())).collect()
            } else {
                (0..data.len()).collect()
            };
            fit_tree(data, rows, params, seed)
        })
        .collect();
    Ok(ForestModel { params: *params, trees })
}

fn class_counts(data: &[Sample], rows: &[usize]) -> [u32; K] {
    let mut c = [0u32; K];
    for &r in rows {
        c[data[r].label.index()] += 1;
    }
    c
}

fn gini(counts: &[u32; K], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn fit_tree(data: &[Sample], rows: Vec<usize>, params: &ForestParams, seed: u64) -> DecisionTree {
    let mut nodes = Vec::new();
    grow(data, rows, params, seed, 1, 0, &mut nodes);
    DecisionTree { nodes }
}

/// Appends the subtree for `rows` and returns its index.
fn grow(
    data: &[Sample],
    rows: Vec<usize>,
    params: &ForestParams,
    seed: u64,
    node_id: u64,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let counts = class_counts(data, &rows);
    let here = nodes.len();
    nodes.push(Node::Leaf { counts });
    let n = rows.len() as u32;
    let parent_impurity = gini(&counts, n);
    if depth >= params.max_depth || parent_impurity == 0.0 || rows.len() < 2 * params.min_leaf {
        return here;
    }
    let mut rng = node_rng(seed, node_id);
    let features = sample_indices(&mut rng, FEATURE_LEN, params.features_per_split);
    let mut best: Option<SplitChoice> = None;
    for feature in features.iter() {
        if let Some(choice) = best_threshold(data, &rows, feature, params.min_leaf) {
            if best.as_ref().is_none_or(|b| choice.impurity < b.impurity) {
                best = Some(choice);
            }
        }
    }
    let Some(split) = best.filter(|b| b.impurity < parent_impurity - 1e-12) else {
        return here;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| data[r].features.values[split.feature] <= split.threshold);
    let left = grow(data, left_rows, params, seed, 2 * node_id, depth + 1, nodes);
    let right = grow(data, right_rows, params, seed, 2 * node_id + 1, depth + 1, nodes);
    nodes[here] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    here
}

/// Lowest weighted child Gini over all midpoints between distinct values,
/// honouring `min_leaf` on both sides. Earliest threshold wins ties.
fn best_threshold(data: &[Sample], rows: &[usize], feature: usize, min_leaf: usize) -> Option<SplitChoice> {
    let mut sorted: Vec<(f64, usize)> = rows
        .iter()
        .map(|&r| (data[r].features.values[feature], data[r].label.index()))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let mut total = [0u32; K];
    for (_, c) in &sorted {
        total[*c] += 1;
    }
    let mut left = [0u32; K];
    let mut best: Option<SplitChoice> = None;
    for i in 1..n {
        left[sorted[i - 1].1] += 1;
        if sorted[i].0 == sorted[i - 1].0 || i < min_leaf || n - i < min_leaf {
            continue;
        }
        let mut right = total;
        for c in 0..K {
            right[c] -= left[c];
        }
        let (nl, nr) = (i as u32, (n - i) as u32);
        let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            best = Some(SplitChoice {
                feature,
                threshold: (sorted[i - 1].0 + sorted[i].0) / 2.0,
                impurity,
            });
        }
    }
    best
}
