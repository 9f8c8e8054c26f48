//! Stratified train/val/test splitting and k-fold partitioning.
//!
//! Both operations shuffle each class's indices with one ChaCha8 stream
//! (classes visited in ascending label order), so a seed fixes the whole
//! partition. Returned index lists are sorted ascending.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.75, val: 0.10, test: 0.15 }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if !parts.iter().all(|p| (0.0..=1.0).contains(p)) {
            return Err(Error::config(format!(
                "split ratios must lie in [0, 1]; got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "split ratios must sum to 1; got {parts:?} (sum {sum})"
            )));
        }
        Ok(())
    }
}

/// Largest-remainder allotment of `n` items across the three parts.
/// Remainder ties go to the earlier part (train, then val, then test).
fn allot(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let quotas = [
        ratios.train * n as f64,
        ratios.val * n as f64,
        ratios.test * n as f64,
    ];
    let mut counts = [0usize; 3];
    let mut fracs: Vec<(f64, usize)> = Vec::with_capacity(3);
    for (i, q) in quotas.iter().enumerate() {
        counts[i] = q.floor() as usize;
        fracs.push((q - q.floor(), i));
    }
    fracs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let assigned: usize = counts.iter().sum();
    for &(_, part) in fracs.iter().take(n - assigned) {
        counts[part] += 1;
    }
    counts
}

/// Indices of each label value, classes in ascending order.
fn group_by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut groups = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        groups[c].push(i);
    }
    groups
}

pub fn stratified_split(
    labels: &[usize],
    ratios: &SplitRatios,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (c, mut ids) in group_by_class(labels).into_iter().enumerate() {
        if ids.len() < 3 {
            return Err(Error::contract(format!(
                "stratified split needs at least 3 members per class; class {c} has {}",
                ids.len()
            )));
        }
        ids.shuffle(&mut rng);
        let [nt, nv, _] = allot(ids.len(), ratios);
        train.extend_from_slice(&ids[..nt]);
        val.extend_from_slice(&ids[nt..nt + nv]);
        test.extend_from_slice(&ids[nt + nv..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((train, val, test))
}

pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config(format!("k-fold needs k >= 2; got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    // The fold cursor continues across classes so total fold sizes stay
    // within one of each other even when class counts are not multiples
    // of k.
    let mut cursor = 0usize;
    for (c, mut ids) in group_by_class(labels).into_iter().enumerate() {
        if ids.len() < k {
            return Err(Error::contract(format!(
                "stratified {k}-fold needs at least {k} members per class; class {c} has {}",
                ids.len()
            )));
        }
        ids.shuffle(&mut rng);
        for id in ids {
            folds[cursor % k].push(id);
            cursor += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imbalanced_labels() -> Vec<usize> {
        let mut labels = vec![0; 119];
        labels.extend(vec![1; 63]);
        labels.extend(vec![2; 18]);
        labels
    }

    fn count_class(part: &[usize], labels: &[usize], class: usize) -> usize {
        part.iter().filter(|&&i| labels[i] == class).count()
    }

    #[test]
    fn largest_remainder_allotment_matches_hand_computation() {
        // Class 119 at 0.75/0.10/0.15: quotas 89.25/11.9/17.85, floors sum
        // 117, the two spare slots go to the .9 and .85 remainders.
        // Class 63: quotas 47.25/6.3/9.45, one spare slot to the .45.
        // Class 18: quotas 13.5/1.8/2.7, spare slots to .8 and .7.
        let labels = imbalanced_labels();
        let ratios = SplitRatios::default();
        let (train, val, test) = stratified_split(&labels, &ratios, 5).unwrap();
        for (class, expect) in [(0, [89, 12, 18]), (1, [47, 6, 10]), (2, [13, 2, 3])] {
            assert_eq!(count_class(&train, &labels, class), expect[0]);
            assert_eq!(count_class(&val, &labels, class), expect[1]);
            assert_eq!(count_class(&test, &labels, class), expect[2]);
        }
        assert_eq!(train.len(), 149);
        assert_eq!(val.len(), 20);
        assert_eq!(test.len(), 31);
    }

    #[test]
    fn degenerate_ratio_puts_everything_in_train() {
        let labels = vec![0, 0, 0, 1, 1, 1];
        let ratios = SplitRatios::new(1.0, 0.0, 0.0).unwrap();
        let (train, val, test) = stratified_split(&labels, &ratios, 0).unwrap();
        assert_eq!(train, vec![0, 1, 2, 3, 4, 5]);
        assert!(val.is_empty());
        assert!(test.is_empty());
    }

    #[test]
    fn parts_partition_the_dataset_for_any_seed() {
        let labels = imbalanced_labels();
        for seed in [0, 1, 7, 999] {
            let (train, val, test) =
                stratified_split(&labels, &SplitRatios::default(), seed).unwrap();
            let mut all: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_is_seed_deterministic_and_seed_sensitive() {
        let labels = imbalanced_labels();
        let ratios = SplitRatios::default();
        let a = stratified_split(&labels, &ratios, 3).unwrap();
        let b = stratified_split(&labels, &ratios, 3).unwrap();
        let c = stratified_split(&labels, &ratios, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn class_below_three_members_is_rejected() {
        let labels = vec![0, 0, 0, 1, 1];
        let err = stratified_split(&labels, &SplitRatios::default(), 0).unwrap_err();
        assert!(err.to_string().contains("class 1"), "{err}");
    }

    #[test]
    fn bad_ratios_are_config_errors() {
        assert!(SplitRatios::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitRatios::new(-0.1, 0.6, 0.5).is_err());
        assert!(SplitRatios::new(0.8, 0.1, 0.1).is_ok());
    }

    #[test]
    fn balanced_thirty_samples_give_one_of_each_class_per_fold() {
        let mut labels = vec![0; 10];
        labels.extend(vec![1; 10]);
        labels.extend(vec![2; 10]);
        let folds = stratified_kfold(&labels, 10, 11).unwrap();
        assert_eq!(folds.len(), 10);
        for fold in &folds {
            assert_eq!(fold.len(), 3);
            for class in 0..3 {
                assert_eq!(count_class(fold, &labels, class), 1);
            }
        }
    }

    #[test]
    fn folds_partition_all_indices() {
        let labels = imbalanced_labels();
        let folds = stratified_kfold(&labels, 10, 2).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
    }

    #[test]
    fn fold_sizes_and_class_counts_stay_within_one() {
        let labels = imbalanced_labels();
        let k = 10;
        let folds = stratified_kfold(&labels, k, 0).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in [0, 1, 2] {
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| count_class(f, &labels, class))
                .collect();
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn kfold_is_seed_deterministic() {
        let labels = imbalanced_labels();
        assert_eq!(
            stratified_kfold(&labels, 10, 8).unwrap(),
            stratified_kfold(&labels, 10, 8).unwrap()
        );
    }

    #[test]
    fn class_smaller_than_k_is_rejected() {
        let mut labels = vec![0; 10];
        labels.extend(vec![1; 10]);
        labels.extend(vec![2; 9]);
        let err = stratified_kfold(&labels, 10, 0).unwrap_err();
        assert!(err.to_string().contains("class 2"), "{err}");
    }
}
