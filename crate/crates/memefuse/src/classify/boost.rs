//! Binary gradient boosting: logistic loss, least-squares stage trees,
//! Newton leaf values, per-stage shrinkage.

use crate::classify::tree::{build_regression, RegNode};
use crate::features::FeatureMatrix;

const LEAF_CLAMP: f64 = 4.0;
const PROB_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostMachine {
    pub f0: f64,
    pub shrinkage: f64,
    pub(crate) stages: Vec<RegNode>,
    /// Training logistic loss after each stage, for diagnostics.
    pub losses: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logistic_loss(y: &[usize], logits: &[f64]) -> f64 {
    y.iter()
        .zip(logits)
        .map(|(&yi, &f)| {
            let p = sigmoid(f).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if yi == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / y.len() as f64
}

impl BoostMachine {
    /// `y` holds 0 (rest) or 1 (target class).
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_stages: usize,
        shrinkage: f64,
        depth: usize,
    ) -> Self {
        let n = x.n_rows();
        let p_mean = (y.iter().sum::<usize>() as f64 / n as f64)
            .clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let f0 = (p_mean / (1.0 - p_mean)).ln();
        let mut logits = vec![f0; n];
        let mut stages = Vec::with_capacity(n_stages);
        let mut losses = Vec::with_capacity(n_stages);
        let all: Vec<usize> = (0..n).collect();
        for _ in 0..n_stages {
            let probs: Vec<f64> = logits.iter().map(|&f| sigmoid(f)).collect();
            let residuals: Vec<f64> = y
                .iter()
                .zip(&probs)
                .map(|(&yi, &p)| yi as f64 - p)
                .collect();
            let leaf_value = |members: &[usize]| -> f64 {
                let num: f64 = members.iter().map(|&i| residuals[i]).sum();
                let den: f64 = members.iter().map(|&i| probs[i] * (1.0 - probs[i])).sum();
                if den < 1e-12 {
                    0.0
                } else {
                    (num / den).clamp(-LEAF_CLAMP, LEAF_CLAMP)
                }
            };
            let tree = build_regression(x, &residuals, &all, depth, &leaf_value);
            for (i, f) in logits.iter_mut().enumerate() {
                *f += shrinkage * tree.predict(x.row(i));
            }
            stages.push(tree);
            losses.push(logistic_loss(y, &logits));
        }
        BoostMachine {
            f0,
            shrinkage,
            stages,
            losses,
        }
    }

    /// Accumulated logit; positive favors the target class.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let mut f = self.f0;
        for tree in &self.stages {
            f += self.shrinkage * tree.predict(row);
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[[f64; 2]], labels: &[usize]) -> FeatureMatrix {
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        FeatureMatrix::new(2, values, labels.to_vec(), ids).unwrap()
    }

    fn noisy_dataset() -> (Vec<[f64; 2]>, Vec<usize>) {
        let rows: Vec<[f64; 2]> = (0..30)
            .map(|i| [((i * 17) % 13) as f64, ((i * 7) % 11) as f64])
            .collect();
        let labels: Vec<usize> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| usize::from(r[0] + r[1] > 10.0) ^ usize::from(i % 9 == 0))
            .collect();
        (rows, labels)
    }

    #[test]
    fn training_loss_never_increases_per_stage() {
        let (rows, labels) = noisy_dataset();
        let x = matrix(&rows, &labels);
        let m = BoostMachine::fit(&x, &labels, 100, 0.1, 3);
        assert_eq!(m.losses.len(), 100);
        for w in m.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn fits_a_clean_boundary() {
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, (i % 5) as f64]).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let x = matrix(&rows, &labels);
        let m = BoostMachine::fit(&x, &labels, 50, 0.1, 2);
        for (row, &yi) in rows.iter().zip(&labels) {
            assert_eq!(m.decision(row) > 0.0, yi == 1);
        }
    }

    #[test]
    fn decision_matches_f0_plus_shrunk_stage_sum() {
        let (rows, labels) = noisy_dataset();
        let x = matrix(&rows, &labels);
        let m = BoostMachine::fit(&x, &labels, 5, 0.1, 2);
        let row = &rows[3];
        let manual: f64 = m.f0
            + m.stages
                .iter()
                .map(|t| m.shrinkage * t.predict(row.as_slice()))
                .sum::<f64>();
        assert!((m.decision(row.as_slice()) - manual).abs() < 1e-12);
    }
}
