//! Binary linear SVC trained with the Pegasos subgradient schedule.
//!
//! Step t uses learning rate 1/(lambda*t); the weight vector shrinks by
//! (1 - eta*lambda) every step and margin violators additionally pull it
//! toward them. The bias is unregularized. The returned machine is the
//! average of the second half of the iterates; the last iterate alone
//! oscillates around the optimum and can leave easily separable points
//! on the wrong side.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SvcMachine {
    pub w: Vec<f64>,
    pub b: f64,
}

impl SvcMachine {
    /// `y` holds 0 (rest) or 1 (target class).
    pub fn fit(x: &FeatureMatrix, y: &[usize], lambda: f64, epochs: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = vec![0.0; x.n_dims()];
        let mut b = 0.0;
        let mut order: Vec<usize> = (0..x.n_rows()).collect();
        let mut t = 1u64;
        let tail_start = (epochs * x.n_rows()) as u64 / 2;
        let mut w_sum = vec![0.0; x.n_dims()];
        let mut b_sum = 0.0;
        let mut kept = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let eta = 1.0 / (lambda * t as f64);
                let yi = if y[i] == 1 { 1.0 } else { -1.0 };
                let row = x.row(i);
                let margin = yi * (dot(&w, row) + b);
                let keep = 1.0 - eta * lambda;
                for wj in w.iter_mut() {
                    *wj *= keep;
                }
                if margin < 1.0 {
                    for (wj, &xj) in w.iter_mut().zip(row) {
                        *wj += eta * yi * xj;
                    }
                    b += eta * yi;
                }
                if t > tail_start {
                    for (s, &wj) in w_sum.iter_mut().zip(&w) {
                        *s += wj;
                    }
                    b_sum += b;
                    kept += 1;
                }
                t += 1;
            }
        }
        let scale = 1.0 / kept.max(1) as f64;
        SvcMachine {
            w: w_sum.iter().map(|&s| s * scale).collect(),
            b: b_sum * scale,
        }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.w, row) + self.b
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[[f64; 2]], labels: &[usize]) -> FeatureMatrix {
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        FeatureMatrix::new(2, values, labels.to_vec(), ids).unwrap()
    }

    #[test]
    fn separates_two_blobs() {
        let rows = [
            [0.0, 0.0], [0.3, 0.1], [0.1, 0.4], [-0.2, 0.2],
            [5.0, 5.0], [5.3, 4.8], [4.7, 5.2], [5.1, 5.4],
        ];
        let y = [0, 0, 0, 0, 1, 1, 1, 1];
        let x = matrix(&rows, &y);
        let m = SvcMachine::fit(&x, &y, 1e-4, 100, 7);
        for (i, row) in rows.iter().enumerate() {
            let score = m.decision(row);
            assert_eq!(score > 0.0, y[i] == 1, "row {i} score {score}");
        }
    }

    #[test]
    fn same_seed_gives_identical_machines() {
        let rows = [[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]];
        let y = [0, 1, 0, 1];
        let x = matrix(&rows, &y);
        let a = SvcMachine::fit(&x, &y, 1e-4, 20, 11);
        let b = SvcMachine::fit(&x, &y, 1e-4, 20, 11);
        assert_eq!(a, b);
        let c = SvcMachine::fit(&x, &y, 1e-4, 20, 12);
        assert_ne!(a, c);
    }
}
