//! K-nearest neighbors over Euclidean distance.
//!
//! Equal-distance neighbors are ordered by training row index; vote ties go
//! to the lowest class index.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub n_classes: usize,
    pub(crate) n_dims: usize,
    pub(crate) values: Vec<f64>,
    pub(crate) labels: Vec<usize>,
}

impl KnnModel {
    pub fn fit(x: &FeatureMatrix, y: &[usize], n_classes: usize, k: usize) -> Result<Self> {
        if k > x.n_rows() {
            return Err(Error::contract(format!(
                "knn: k {k} exceeds {} training rows",
                x.n_rows()
            )));
        }
        Ok(KnnModel {
            k,
            n_classes,
            n_dims: x.n_dims(),
            values: x.values().to_vec(),
            labels: y.to_vec(),
        })
    }

    fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let n = self.labels.len();
        let mut order: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let train = &self.values[i * self.n_dims..(i + 1) * self.n_dims];
                let d2: f64 = train.iter().zip(row).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
        order.truncate(self.k);
        order.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote fraction per class among the k nearest training rows.
    pub fn class_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for i in self.neighbors(row) {
            votes[self.labels[i]] += 1.0;
        }
        for v in &mut votes {
            *v /= self.k as f64;
        }
        votes
    }
}
