//! Confusion matrices and precision/recall/F1 reports.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-class precision/recall/F1 plus the underlying confusion matrix.
/// Rows of the matrix are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ClassificationReport {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<u64>>,
    /// Row sums: number of ground-truth samples per class.
    pub support: Vec<u64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// True where a precision or recall denominator was empty; such
    /// entries are reported as 0 rather than NaN.
    pub degenerate: Vec<bool>,
    /// Unweighted mean F1 over classes with nonzero support.
    pub macro_f1: f64,
}

/// Tallies `matrix[truth][pred]` counts. Entries must be below `classes`.
pub fn confusion(truth: &[usize], pred: &[usize], classes: usize) -> Result<Vec<Vec<u64>>> {
    if truth.len() != pred.len() {
        return Err(Error::Data(format!(
            "confusion inputs differ in length: {} truth vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    if classes == 0 {
        return Err(Error::Data("confusion needs at least one class".into()));
    }
    let mut matrix = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(pred.iter()) {
        if t >= classes || p >= classes {
            return Err(Error::Data(format!(
                "class index out of range: truth {t}, pred {p}, classes {classes}"
            )));
        }
        matrix[t][p] += 1;
    }
    Ok(matrix)
}

/// Builds the full report from a square confusion matrix.
pub fn report(matrix: &[Vec<u64>], labels: &[String]) -> Result<ClassificationReport> {
    let c = matrix.len();
    if c == 0 || matrix.iter().any(|row| row.len() != c) {
        return Err(Error::Data("confusion matrix must be square and non-empty".into()));
    }
    if labels.len() != c {
        return Err(Error::Data(format!("{} labels for a {c}x{c} matrix", labels.len())));
    }
    let mut support = vec![0u64; c];
    let mut predicted = vec![0u64; c];
    for (t, row) in matrix.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            support[t] += count;
            predicted[p] += count;
        }
    }
    let mut precision = vec![0.0; c];
    let mut recall = vec![0.0; c];
    let mut f1 = vec![0.0; c];
    let mut degenerate = vec![false; c];
    for i in 0..c {
        let tp = matrix[i][i] as f64;
        if predicted[i] == 0 || support[i] == 0 {
            degenerate[i] = true;
        }
        if predicted[i] > 0 {
            precision[i] = tp / predicted[i] as f64;
        }
        if support[i] > 0 {
            recall[i] = tp / support[i] as f64;
        }
        if precision[i] + recall[i] > 0.0 {
            f1[i] = 2.0 * precision[i] * recall[i] / (precision[i] + recall[i]);
        }
    }
    let with_support: Vec<usize> = (0..c).filter(|&i| support[i] > 0).collect();
    let macro_f1 = if with_support.is_empty() {
        0.0
    } else {
        with_support.iter().map(|&i| f1[i]).sum::<f64>() / with_support.len() as f64
    };
    Ok(ClassificationReport {
        labels: labels.to_vec(),
        matrix: matrix.to_vec(),
        support,
        precision,
        recall,
        f1,
        degenerate,
        macro_f1,
    })
}

impl ClassificationReport {
    /// Convenience: confusion + report in one call.
    pub fn from_pairs(truth: &[usize], pred: &[usize], labels: &[String]) -> Result<ClassificationReport> {
        let matrix = confusion(truth, pred, labels.len())?;
        report(&matrix, labels)
    }

    /// `class,support,precision,recall,f1` rows, full precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("class,support,precision,recall,f1\n");
        for i in 0..self.labels.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.labels[i], self.support[i], self.precision[i], self.recall[i], self.f1[i]
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Human-readable table with values rounded to 2 decimals, matching
    /// the precision used in the written-up results this mirrors.
    pub fn format_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>10} {:>8} {:>8}", "class", "support", "precision", "recall", "f1");
        for i in 0..self.labels.len() {
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>10.2} {:>8.2} {:>8.2}{}",
                self.labels[i],
                self.support[i],
                self.precision[i],
                self.recall[i],
                self.f1[i],
                if self.degenerate[i] { "  (no samples)" } else { "" }
            );
        }
        let _ = writeln!(out, "macro F1 {:.2}", self.macro_f1);
        out
    }
}
