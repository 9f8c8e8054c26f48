//! Dataset splitting, macro-F1 scoring, stratified cross-validation, and
//! result reporting.

mod metrics;
mod report;
mod split;

pub use metrics::macro_f1;
pub use report::{report_csv, report_table, FoldReport, ReportRow};
pub use split::{stratified_kfold, stratified_split, SplitRatios};

use crate::classify::{self, ClassifierSpec};
use crate::error::Result;
use crate::features::FeatureMatrix;

/// Stratified k-fold cross-validation of one classifier spec over a fixed
/// feature matrix. Fold i trains on the other k-1 folds with seed
/// `seed + i`, so any single fold can be reproduced in isolation. Scores
/// use the class count of the full matrix.
pub fn cross_validate(
    spec: &ClassifierSpec,
    features: &FeatureMatrix,
    k: usize,
    seed: u64,
) -> Result<FoldReport> {
    let folds = stratified_kfold(features.labels(), k, seed)?;
    let n_classes = features.n_classes();
    let mut in_fold = vec![false; features.n_rows()];
    let mut scores = Vec::with_capacity(k);
    for (i, fold) in folds.iter().enumerate() {
        for &ix in fold {
            in_fold[ix] = true;
        }
        let train_idx: Vec<usize> = (0..features.n_rows()).filter(|&ix| !in_fold[ix]).collect();
        assert!(
            train_idx.iter().all(|ix| !fold.contains(ix)),
            "fold {i} leaked into its own training set"
        );
        let train = features.subset(&train_idx)?;
        let held_out = features.subset(fold)?;
        let clf = classify::fit(spec, &train, seed + i as u64)?;
        let pred = clf.predict(&held_out)?;
        scores.push(macro_f1(held_out.labels(), &pred, n_classes)?);
        for &ix in fold {
            in_fold[ix] = false;
        }
    }
    FoldReport::from_scores(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    /// Three well-separated 1D clusters, ten samples each.
    fn separable() -> FeatureMatrix {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3usize {
            for j in 0..10 {
                values.push(c as f64 * 10.0 + j as f64 * 0.1);
                labels.push(c);
            }
        }
        let ids = (0..labels.len()).map(|i| format!("s{i}")).collect();
        FeatureMatrix::new(1, values, labels, ids).unwrap()
    }

    /// Labels round-robin over 3 classes with features too coarse for a
    /// depth-1 tree, so fold scores land strictly below 1.
    fn noisy() -> FeatureMatrix {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut state = 9u64;
        for i in 0..60usize {
            let c = i % 3;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let noise = (state >> 40) as f64 / (1u64 << 24) as f64;
            values.push(c as f64 + 3.0 * noise);
            labels.push(c);
        }
        let ids = (0..labels.len()).map(|i| format!("s{i}")).collect();
        FeatureMatrix::new(1, values, labels, ids).unwrap()
    }

    #[test]
    fn separable_data_scores_perfectly_in_every_fold() {
        let report = cross_validate(&ClassifierSpec::knn(1), &separable(), 10, 4).unwrap();
        assert_eq!(report.per_fold, vec![1.0; 10]);
        assert_eq!((report.mean, report.min, report.max, report.std), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn aggregates_match_an_independent_recompute() {
        let mut spec = ClassifierSpec::decision_tree();
        spec.tree_max_depth = 1;
        let report = cross_validate(&spec, &noisy(), 10, 7).unwrap();
        assert!(report.max < 1.0, "a two-leaf tree cannot separate 3 classes");
        let n = report.per_fold.len() as f64;
        let mean = report.per_fold.iter().sum::<f64>() / n;
        let min = report.per_fold.iter().copied().fold(f64::INFINITY, f64::min);
        let max = report.per_fold.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let std =
            (report.per_fold.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert_eq!(report.mean, mean);
        assert_eq!(report.min, min);
        assert_eq!(report.max, max);
        assert_eq!(report.std, std);
    }

    #[test]
    fn same_seed_reproduces_the_report() {
        let spec = ClassifierSpec::random_forest();
        let a = cross_validate(&spec, &noisy(), 5, 21).unwrap();
        let b = cross_validate(&spec, &noisy(), 5, 21).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_spec_errors_propagate() {
        assert!(matches!(
            cross_validate(&ClassifierSpec::knn(2), &separable(), 10, 0).unwrap_err(),
            Error::Config(_)
        ));
    }
}
