use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion matrix plus derived metrics. Rows are true classes, columns
/// predicted classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    /// Zero for a class that was never predicted.
    pub precision: Vec<f64>,
    /// Zero for a class absent from the truth.
    pub recall: Vec<f64>,
}

impl EvaluationReport {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.confusion[i][i]).sum()
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Compares predicted and true labels over the category set `classes`.
pub fn evaluate<S: AsRef<str>, T: AsRef<str>>(
    predictions: &[S],
    truth: &[T],
    classes: &[String],
) -> Result<EvaluationReport> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), found: predictions.len() });
    }
    if predictions.is_empty() {
        return Err(Error::InsufficientData("nothing to evaluate".into()));
    }
    let index = |s: &str| {
        classes.iter().position(|c| c == s).ok_or_else(|| Error::InvalidParameter(format!("unknown label `{s}`")))
    };
    let n = classes.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for (p, t) in predictions.iter().zip(truth) {
        confusion[index(t.as_ref())?][index(p.as_ref())?] += 1;
    }
    let total = predictions.len();
    let correct: usize = (0..n).map(|i| confusion[i][i]).sum();
    let precision = (0..n).map(|j| ratio(confusion[j][j], (0..n).map(|i| confusion[i][j]).sum())).collect();
    let recall = (0..n).map(|i| ratio(confusion[i][i], confusion[i].iter().sum())).collect();
    Ok(EvaluationReport { classes: classes.to_vec(), confusion, accuracy: ratio(correct, total), precision, recall })
}
