use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification quality over a set of utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub weighted_f1: f64,
    /// Unweighted mean over all classes; classes without support count as 0.
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
    pub support: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn compute_metrics(labels: &[usize], predictions: &[usize], num_classes: usize) -> Result<EvalReport> {
    if labels.len() != predictions.len() {
        return Err(Error::Contract(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() || num_classes == 0 {
        return Err(Error::Contract("metrics need at least one utterance and class".into()));
    }
    let k = num_classes;
    let mut confusion = vec![vec![0usize; k]; k];
    for (&y, &p) in labels.iter().zip(predictions) {
        if y >= k || p >= k {
            return Err(Error::Index(format!("class {} outside 0..{k}", y.max(p))));
        }
        confusion[y][p] += 1;
    }
    let total = labels.len();
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let predicted: Vec<usize> = (0..k).map(|c| confusion.iter().map(|r| r[c]).sum()).collect();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class_f1: Vec<f64> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let p = ratio(tp, predicted[c]);
            let r = ratio(tp, support[c]);
            if p + r == 0.0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            }
        })
        .collect();
    let weighted_f1 = per_class_f1
        .iter()
        .zip(&support)
        .map(|(f, &s)| f * s as f64)
        .sum::<f64>()
        / total as f64;
    let macro_f1 = per_class_f1.iter().sum::<f64>() / k as f64;
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        weighted_f1,
        macro_f1,
        accuracy: ratio(correct, total),
        per_class_f1,
        support,
        confusion,
    })
}
