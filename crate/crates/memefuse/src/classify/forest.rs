//! Random forest: bootstrapped Gini trees with per-split feature
//! subsampling, majority vote across trees.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::argmax_lowest;
use crate::classify::tree::{FeaturePolicy, TreeModel};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub n_classes: usize,
    pub(crate) trees: Vec<TreeModel>,
}

impl ForestModel {
    #[allow(clippy::too_many_arguments)] // one parameter per forest knob
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        n_trees: usize,
        max_depth: usize,
        bootstrap: bool,
        subsample_features: bool,
        seed: u64,
    ) -> Self {
        let n = x.n_rows();
        let policy = if subsample_features {
            let m = (x.n_dims() as f64).sqrt().ceil() as usize;
            FeaturePolicy::Subsample(m.max(1))
        } else {
            FeaturePolicy::All
        };
        let mut trees = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let (bx, by);
            let (tx, ty): (&FeatureMatrix, &[usize]) = if bootstrap {
                let draws: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                bx = x.subset(&draws).expect("draws are in range");
                by = draws.iter().map(|&i| y[i]).collect::<Vec<_>>();
                (&bx, &by)
            } else {
                (x, y)
            };
            trees.push(TreeModel::fit(tx, ty, n_classes, max_depth, policy, &mut rng));
        }
        ForestModel { n_classes, trees }
    }

    /// Fraction of trees voting for each class.
    pub fn class_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[argmax_lowest(&tree.class_scores(row))] += 1.0;
        }
        for v in &mut votes {
            *v /= self.trees.len() as f64;
        }
        votes
    }
}
