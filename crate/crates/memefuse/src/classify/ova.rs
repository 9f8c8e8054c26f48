//! One-vs-all decomposition over any binary learner.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Trains one machine per class on relabeled data: rows of class `c` become
/// 1, every other row 0. Machine `c` trains with seed `seed + c`.
pub fn ova_decompose<M>(
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    seed: u64,
    mut fit_binary: impl FnMut(&FeatureMatrix, &[usize], u64) -> Result<M>,
) -> Result<Vec<M>> {
    if n_classes < 2 {
        return Err(Error::contract(
            "one-vs-all needs at least two classes",
        ));
    }
    let mut machines = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let binary: Vec<usize> = y.iter().map(|&yi| usize::from(yi == c)).collect();
        machines.push(fit_binary(x, &binary, seed.wrapping_add(c as u64))?);
    }
    Ok(machines)
}

/// Argmax over machine decision scores; score ties go to the lowest class.
pub fn ova_predict<M>(machines: &[M], row: &[f64], decision: impl Fn(&M, &[f64]) -> f64) -> usize {
    let scores: Vec<f64> = machines.iter().map(|m| decision(m, row)).collect();
    crate::classify::argmax_lowest(&scores)
}
