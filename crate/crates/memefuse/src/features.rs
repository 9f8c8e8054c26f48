//! Extracted feature rows plus their sample ids and labels.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_dims: usize,
    values: Vec<f64>,
    labels: Vec<usize>,
    ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        n_dims: usize,
        values: Vec<f64>,
        labels: Vec<usize>,
        ids: Vec<String>,
    ) -> Result<Self> {
        if n_dims == 0 {
            return Err(Error::contract("feature matrix needs at least one dimension"));
        }
        if values.len() != labels.len() * n_dims || labels.len() != ids.len() {
            return Err(Error::contract(format!(
                "feature matrix mismatch: {} values, {} labels, {} ids, dim {n_dims}",
                values.len(),
                labels.len(),
                ids.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "feature matrix" });
        }
        Ok(FeatureMatrix {
            n_dims,
            values,
            labels,
            ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_dims..(i + 1) * self.n_dims]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// New matrix holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<FeatureMatrix> {
        let mut values = Vec::with_capacity(indices.len() * self.n_dims);
        let mut labels = Vec::with_capacity(indices.len());
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows() {
                return Err(Error::contract(format!(
                    "subset index {i} out of range for {} rows",
                    self.n_rows()
                )));
            }
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            ids.push(self.ids[i].clone());
        }
        FeatureMatrix::new(self.n_dims, values, labels, ids)
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }
}
