//! Fold-score aggregation and the two report renderings: machine-readable
//! CSV rows and an aligned plain-text table. Scores are stored as fractions
//! and rendered as percentages with two decimals.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation over the folds.
    pub std: f64,
}

impl FoldReport {
    pub fn from_scores(per_fold: Vec<f64>) -> Result<Self> {
        if per_fold.is_empty() {
            return Err(Error::contract("fold report needs at least one score"));
        }
        if let Some(&bad) = per_fold.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::contract(format!(
                "fold scores must lie in [0, 1]; got {bad}"
            )));
        }
        let n = per_fold.len() as f64;
        let min = per_fold.iter().copied().fold(f64::INFINITY, f64::min);
        let max = per_fold.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Equal scores mean exactly zero spread; skipping the arithmetic
        // keeps accumulated rounding out of that case.
        let (mean, std) = if min == max {
            (min, 0.0)
        } else {
            let mean = per_fold.iter().sum::<f64>() / n;
            let var = per_fold.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        Ok(FoldReport { per_fold, mean, min, max, std })
    }
}

/// One evaluated (classifier, feature tap) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub tap: String,
    pub scores: FoldReport,
}

fn percent_cells(r: &FoldReport) -> [String; 4] {
    [r.mean, r.min, r.max, r.std].map(|v| format!("{:.2}", 100.0 * v))
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("model,tap,mean,min,max,std\n");
    for row in rows {
        let [mean, min, max, std] = percent_cells(&row.scores);
        out.push_str(&format!(
            "{},{},{mean},{min},{max},{std}\n",
            row.model, row.tap
        ));
    }
    out
}

pub fn report_table(rows: &[ReportRow]) -> String {
    let headers = ["model", "tap", "mean", "min", "max", "std"];
    let mut cells: Vec<[String; 6]> = Vec::with_capacity(rows.len());
    for row in rows {
        let [mean, min, max, std] = percent_cells(&row.scores);
        cells.push([row.model.clone(), row.tap.clone(), mean, min, max, std]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let render = |out: &mut String, row: &[String; 6]| {
        for (i, (cell, &w)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i < 2 {
                out.push_str(&format!("{cell:<w$}"));
            } else {
                out.push_str(&format!("{cell:>w$}"));
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    render(&mut out, &headers.map(String::from));
    for row in &cells {
        render(&mut out, row);
    }
    out
}
