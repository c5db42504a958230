//! Accuracy, per-class precision/recall/F1, and the confusion matrix.

use serde::{Deserialize, Serialize};

use super::{EvalError, EvalResult};
use crate::data::{Delay, Label, LabelSet};

/// One-vs-rest scores for a single class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold instances of this class.
    pub support: usize,
}

/// Scores for one evaluated set of cascades. `confusion[gold][pred]` counts
/// pairs by class index; rows and `classes` follow the label set's order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub classes: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
    /// Set when this report is one point of an early-detection sweep.
    pub delay: Option<Delay>,
}

impl EvalReport {
    /// Micro-averaged recall: pooled true positives over pooled golds. Equals
    /// accuracy whenever each item carries exactly one label.
    pub fn micro_recall(&self) -> f64 {
        let trace: usize = (0..self.confusion.len())
            .map(|c| self.confusion[c][c])
            .sum();
        trace as f64 / self.n as f64
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score `preds` against `golds` over the classes of `set`. Both slices pair
/// up index-by-index; every label must belong to `set`.
pub fn metrics(preds: &[Label], golds: &[Label], set: LabelSet) -> EvalResult<EvalReport> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let index = |label: Label| {
        set.class_index(label)
            .ok_or(EvalError::UnknownLabel { label, set })
    };

    let k = set.n_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&pred, &gold) in preds.iter().zip(golds) {
        confusion[index(gold)?][index(pred)?] += 1;
    }

    let n = preds.len();
    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    let classes = set
        .classes()
        .iter()
        .enumerate()
        .map(|(c, &label)| {
            let tp = confusion[c][c];
            let predicted: usize = (0..k).map(|g| confusion[g][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();

    Ok(EvalReport {
        accuracy: trace as f64 / n as f64,
        classes,
        confusion,
        n,
        delay: None,
    })
}
