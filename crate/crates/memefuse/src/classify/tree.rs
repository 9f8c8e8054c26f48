//! CART trees: Gini classification and least-squares regression.
//!
//! Split scan: features in ascending index order, thresholds at midpoints of
//! consecutive sorted unique values, candidate accepted only when strictly
//! better, so ties keep the lowest feature index and lowest threshold.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { counts: Vec<f64> },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub n_classes: usize,
    pub(crate) root: Node,
}

#[derive(Debug, Clone, Copy)]
pub enum FeaturePolicy {
    All,
    /// Sample this many distinct features per split.
    Subsample(usize),
}

impl TreeModel {
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        max_depth: usize,
        policy: FeaturePolicy,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let indices: Vec<usize> = (0..x.n_rows()).collect();
        let root = build_classification(x, y, n_classes, &indices, max_depth, policy, rng);
        TreeModel { n_classes, root }
    }

    /// Class fractions at the leaf the row lands in.
    pub fn class_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { counts } => {
                    let total: f64 = counts.iter().sum();
                    return counts.iter().map(|c| c / total).collect();
                }
                Node::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

fn class_counts(y: &[usize], indices: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for &i in indices {
        counts[y[i]] += 1.0;
    }
    counts
}

fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

fn candidate_features(
    n_dims: usize,
    policy: FeaturePolicy,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    match policy {
        FeaturePolicy::All => (0..n_dims).collect(),
        FeaturePolicy::Subsample(m) => {
            let mut all: Vec<usize> = (0..n_dims).collect();
            all.shuffle(rng);
            all.truncate(m.min(n_dims));
            all.sort_unstable();
            all
        }
    }
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// Scans one feature; `score_of` turns (left members, right members) into the
/// quantity to minimize. Candidates arrive in ascending threshold order.
fn scan_feature(
    x: &FeatureMatrix,
    indices: &[usize],
    feature: usize,
    best: &mut Option<BestSplit>,
    mut score_of: impl FnMut(&[usize], &[usize]) -> f64,
) {
    let mut ordered: Vec<usize> = indices.to_vec();
    ordered.sort_by(|&a, &b| {
        x.row(a)[feature]
            .partial_cmp(&x.row(b)[feature])
            .expect("finite features")
    });
    for cut in 1..ordered.len() {
        let lo = x.row(ordered[cut - 1])[feature];
        let hi = x.row(ordered[cut])[feature];
        if lo == hi {
            continue;
        }
        let threshold = lo + (hi - lo) / 2.0;
        let score = score_of(&ordered[..cut], &ordered[cut..]);
        let better = match best {
            None => true,
            Some(b) => score < b.score,
        };
        if better {
            *best = Some(BestSplit { score, feature, threshold });
        }
    }
}

fn build_classification(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    indices: &[usize],
    depth_left: usize,
    policy: FeaturePolicy,
    rng: &mut ChaCha8Rng,
) -> Node {
    let counts = class_counts(y, indices, n_classes);
    let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
    if depth_left == 0 || pure {
        return Node::Leaf { counts };
    }
    let mut best: Option<BestSplit> = None;
    for feature in candidate_features(x.n_dims(), policy, rng) {
        scan_feature(x, indices, feature, &mut best, |left, right| {
            let lc = class_counts(y, left, n_classes);
            let rc = class_counts(y, right, n_classes);
            let n = indices.len() as f64;
            (left.len() as f64 * gini(&lc) + right.len() as f64 * gini(&rc)) / n
        });
    }
    match best {
        None => Node::Leaf { counts },
        Some(split) => {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &i in indices {
                if x.row(i)[split.feature] <= split.threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(build_classification(x, y, n_classes, &left, depth_left - 1, policy, rng)),
                right: Box::new(build_classification(x, y, n_classes, &right, depth_left - 1, policy, rng)),
            }
        }
    }
}

/// Regression tree node; leaves hold the fitted value directly.
#[derive(Debug, Clone, PartialEq)]
pub enum RegNode {
    Leaf { value: f64 },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
}

impl RegNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                RegNode::Leaf { value } => return *value,
                RegNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// Least-squares splits on `targets`; leaf values from `leaf_value` over the
/// member rows (the boosting stage supplies a Newton estimate there).
pub fn build_regression(
    x: &FeatureMatrix,
    targets: &[f64],
    indices: &[usize],
    depth_left: usize,
    leaf_value: &impl Fn(&[usize]) -> f64,
) -> RegNode {
    let constant = indices
        .windows(2)
        .all(|w| targets[w[0]] == targets[w[1]]);
    if depth_left == 0 || indices.len() < 2 || constant {
        return RegNode::Leaf { value: leaf_value(indices) };
    }
    let sse = |members: &[usize]| -> f64 {
        let n = members.len() as f64;
        let sum: f64 = members.iter().map(|&i| targets[i]).sum();
        let sumsq: f64 = members.iter().map(|&i| targets[i] * targets[i]).sum();
        sumsq - sum * sum / n
    };
    let mut best: Option<BestSplit> = None;
    for feature in 0..x.n_dims() {
        scan_feature(x, indices, feature, &mut best, |left, right| sse(left) + sse(right));
    }
    match best {
        None => RegNode::Leaf { value: leaf_value(indices) },
        Some(split) => {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &i in indices {
                if x.row(i)[split.feature] <= split.threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            RegNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(build_regression(x, targets, &left, depth_left - 1, leaf_value)),
                right: Box::new(build_regression(x, targets, &right, depth_left - 1, leaf_value)),
            }
        }
    }
}
