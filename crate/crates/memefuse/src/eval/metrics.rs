//! Macro-averaged F1: the unweighted mean of per-class F1 scores, so every
//! class counts equally regardless of its share of the data.

use crate::error::{Error, Result};

/// A class with no true and no predicted members scores 0, as does any
/// class with an undefined precision or recall (the 0/0 cases).
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::contract(format!(
            "macro_f1: {} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if n_classes == 0 {
        return Err(Error::config("macro_f1: n_classes must be positive"));
    }
    for &label in y_true.iter().chain(y_pred) {
        if label >= n_classes {
            return Err(Error::Label { label, n_classes });
        }
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    for c in 0..n_classes {
        let precision = if tp[c] + fp[c] == 0 {
            0.0
        } else {
            tp[c] as f64 / (tp[c] + fp[c]) as f64
        };
        let recall = if tp[c] + fn_[c] == 0 {
            0.0
        } else {
            tp[c] as f64 / (tp[c] + fn_[c]) as f64
        };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(sum / n_classes as f64)
}
