//! Pretrained word vectors.
//!
//! Vector files are UTF-8 text, one `word v1 .. vdim` entry per line. Corpus
//! tokens are stemmed, pretrained files usually are not, so lookup tries the
//! token as written and then its stem; what happened is kept per id for
//! diagnostics.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::porter::stem;
use crate::text::vocab::{Vocabulary, PAD_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovPolicy {
    ZeroVector,
    MeanVector,
}

/// How each corpus token's vector was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupOutcome {
    Raw,
    Stemmed,
    Missing,
}

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub dim: usize,
    rows: Vec<f64>,
    outcomes: Vec<LookupOutcome>,
    pub oov_policy: OovPolicy,
}

impl EmbeddingTable {
    /// Builds a table directly from a row-major `vocab_size x dim` buffer
    /// (row 0 is PAD, row 1 is the OOV vector). Every corpus token is
    /// marked as a raw hit.
    pub fn from_rows(dim: usize, rows: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::format("embedding dimension must be positive"));
        }
        if !rows.len().is_multiple_of(dim) || rows.len() / dim < 2 {
            return Err(Error::contract(format!(
                "embedding buffer of {} values does not hold whole rows of dim {dim} plus PAD and OOV",
                rows.len()
            )));
        }
        if !rows.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "embedding table" });
        }
        let outcomes = vec![LookupOutcome::Raw; rows.len() / dim - 2];
        Ok(EmbeddingTable { dim, rows, outcomes, oov_policy: OovPolicy::ZeroVector })
    }

    pub fn vocab_size(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.rows[id * self.dim..(id + 1) * self.dim]
    }

    /// Lookup outcome for a corpus id (ids below 2 are not corpus tokens).
    pub fn lookup_outcome(&self, id: usize) -> Option<LookupOutcome> {
        id.checked_sub(2).and_then(|i| self.outcomes.get(i)).copied()
    }

    pub fn missing_count(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, LookupOutcome::Missing))
            .count()
    }

    /// Stacks the rows for an id sequence into an `L x dim` row-major buffer.
    pub fn sequence_matrix(&self, ids: &[usize]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(ids.len() * self.dim);
        for &id in ids {
            if id >= self.vocab_size() {
                return Err(Error::contract(format!(
                    "embedding lookup: id {id} out of range for {} rows",
                    self.vocab_size()
                )));
            }
            out.extend_from_slice(self.row(id));
        }
        Ok(out)
    }
}

pub fn load_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    oov_policy: OovPolicy,
) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::format("embedding dim must be positive"));
    }
    let text = fs::read_to_string(path)?;
    let mut file_vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!(
                    "expected {} fields for dim {dim}, got {}",
                    dim + 1,
                    fields.len()
                ),
            });
        }
        let mut vec = Vec::with_capacity(dim);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad float {f:?}"),
            })?;
            vec.push(v);
        }
        for (s, &v) in sum.iter_mut().zip(&vec) {
            *s += v;
        }
        count += 1;
        // First entry wins on duplicate words.
        file_vectors.entry(fields[0].to_string()).or_insert(vec);
    }

    let oov_vector: Vec<f64> = match oov_policy {
        OovPolicy::ZeroVector => vec![0.0; dim],
        OovPolicy::MeanVector => {
            if count == 0 {
                vec![0.0; dim]
            } else {
                sum.iter().map(|s| s / count as f64).collect()
            }
        }
    };

    let mut rows = vec![0.0; vocab.len() * dim];
    rows[dim..2 * dim].copy_from_slice(&oov_vector);
    let mut outcomes = Vec::with_capacity(vocab.len() - 2);
    for (offset, token) in vocab.corpus_tokens().enumerate() {
        let id = offset + 2;
        let (vector, outcome) = if let Some(v) = file_vectors.get(token) {
            (v.as_slice(), LookupOutcome::Raw)
        } else if let Some(v) = file_vectors.get(stem(token).as_str()) {
            (v.as_slice(), LookupOutcome::Stemmed)
        } else {
            (oov_vector.as_slice(), LookupOutcome::Missing)
        };
        rows[id * dim..(id + 1) * dim].copy_from_slice(vector);
        outcomes.push(outcome);
    }
    rows[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
    Ok(EmbeddingTable {
        dim,
        rows,
        outcomes,
        oov_policy,
    })
}
