//! Thresholded multi-label evaluation: per-class precision, recall, F1,
//! and their unweighted (macro) mean.
//!
//! Conventions, fixed for determinism: a probability equal to the threshold
//! counts as a positive prediction, and any 0/0 ratio is defined as 0.

use serde::{Deserialize, Serialize};

use crate::labels::{LabelValue, PartialLabelMatrix};
use crate::tensor::Tensor;

/// Per-class confusion counts over labeled entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl ClassCounts {
    pub fn evaluated(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Confusion counts for every class; a prediction is positive iff
/// `p >= threshold`, and missing label entries are excluded from all counts.
pub fn confusion(
    probabilities: &Tensor,
    labels: &PartialLabelMatrix,
    threshold: f64,
) -> Vec<ClassCounts> {
    assert_eq!(
        probabilities.shape(),
        &[labels.rows(), labels.cols()],
        "probability shape must match the label grid"
    );
    let mut counts = vec![ClassCounts::default(); labels.cols()];
    for row in 0..labels.rows() {
        for (class, count) in counts.iter_mut().enumerate() {
            let predicted_pos = probabilities.at(row, class) >= threshold;
            match labels.get(row, class) {
                LabelValue::Missing => {}
                LabelValue::Positive => {
                    if predicted_pos {
                        count.true_pos += 1;
                    } else {
                        count.false_neg += 1;
                    }
                }
                LabelValue::Negative => {
                    if predicted_pos {
                        count.false_pos += 1;
                    } else {
                        count.true_neg += 1;
                    }
                }
            }
        }
    }
    counts
}

/// Precision, recall, and F1 from confusion counts; every 0/0 is 0.
pub fn f1_from_counts(true_pos: usize, false_pos: usize, false_neg: usize) -> (f64, f64, f64) {
    let ratio = |num: usize, denom: usize| if denom == 0 { 0.0 } else { num as f64 / denom as f64 };
    let precision = ratio(true_pos, true_pos + false_pos);
    let recall = ratio(true_pos, true_pos + false_neg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Unweighted mean over per-class F1 scores.
pub fn mean_f1(per_class_f1: &[f64]) -> f64 {
    assert!(!per_class_f1.is_empty(), "mean over zero classes");
    per_class_f1.iter().sum::<f64>() / per_class_f1.len() as f64
}

/// Confusion counts plus derived scores for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub counts: ClassCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Evaluation of one model state against a labeled (possibly partial) set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub epoch: usize,
    pub seed: u64,
    pub threshold: f64,
    pub per_class: Vec<ClassMetrics>,
    pub mean_f1: f64,
}

/// Threshold, count, and score per class, plus the macro mean F1.
pub fn evaluate(
    probabilities: &Tensor,
    labels: &PartialLabelMatrix,
    threshold: f64,
    epoch: usize,
    seed: u64,
) -> MetricsReport {
    let per_class: Vec<ClassMetrics> = confusion(probabilities, labels, threshold)
        .into_iter()
        .map(|counts| {
            let (precision, recall, f1) =
                f1_from_counts(counts.true_pos, counts.false_pos, counts.false_neg);
            ClassMetrics {
                counts,
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let mean = mean_f1(&per_class.iter().map(|c| c.f1).collect::<Vec<_>>());
    MetricsReport {
        epoch,
        seed,
        threshold,
        per_class,
        mean_f1: mean,
    }
}

impl MetricsReport {
    pub fn per_class_f1(&self) -> Vec<f64> {
        self.per_class.iter().map(|c| c.f1).collect()
    }
}
