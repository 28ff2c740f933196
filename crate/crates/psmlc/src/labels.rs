//! Ternary label grids for partially supervised multi-label data.
//!
//! A label entry is positive, negative, or missing. Missing entries are
//! filled with 0.5 (the maximum-entropy value for an unknown binary state)
//! when a dense target tensor is needed, and excluded from the loss through
//! an explicit binary mask. The 0.5 sentinel never collides with a real
//! label because real labels are binary by construction.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One cell of a partial label matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelValue {
    Positive,
    Negative,
    Missing,
}

impl LabelValue {
    /// CSV token: `1`, `0`, or `?`.
    pub fn token(self) -> &'static str {
        match self {
            LabelValue::Positive => "1",
            LabelValue::Negative => "0",
            LabelValue::Missing => "?",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        match token {
            "1" => Ok(LabelValue::Positive),
            "0" => Ok(LabelValue::Negative),
            "?" => Ok(LabelValue::Missing),
            other => Err(Error::Input(format!("unknown label token {other:?}"))),
        }
    }

    pub fn is_labeled(self) -> bool {
        self != LabelValue::Missing
    }

    /// Maximum-entropy fill: 1.0 / 0.0 for known labels, 0.5 for missing.
    pub fn fill_value(self) -> f64 {
        match self {
            LabelValue::Positive => 1.0,
            LabelValue::Negative => 0.0,
            LabelValue::Missing => 0.5,
        }
    }
}

/// N x K grid of ternary labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialLabelMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<LabelValue>,
}

impl PartialLabelMatrix {
    /// All-missing matrix. `cols` must be at least 1.
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Input("label matrix needs at least one class".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries: vec![LabelValue::Missing; rows * cols],
        })
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<LabelValue>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Input("label matrix needs at least one class".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Input(format!(
                "label matrix {rows}x{cols} expects {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    /// Build from rows of `LabelValue`.
    pub fn from_rows(rows: &[Vec<LabelValue>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Input("ragged label rows".into()));
        }
        Self::from_entries(rows.len(), cols, rows.iter().flatten().copied().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> LabelValue {
        self.entries[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: LabelValue) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[LabelValue] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn gather_rows(&self, indices: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            entries.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            entries,
        }
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.entries.iter().all(|e| e.is_labeled())
    }

    /// Dense targets: positive -> 1.0, negative -> 0.0, missing -> 0.5.
    pub fn pme_fill(&self) -> Tensor {
        let data = self.entries.iter().map(|e| e.fill_value()).collect();
        Tensor::from_vec(&[self.rows, self.cols], data).expect("entry count matches shape")
    }

    /// Loss mask: 1.0 where labeled, 0.0 where missing.
    pub fn mask_of(&self) -> Tensor {
        let data = self
            .entries
            .iter()
            .map(|e| if e.is_labeled() { 1.0 } else { 0.0 })
            .collect();
        Tensor::from_vec(&[self.rows, self.cols], data).expect("entry count matches shape")
    }

    /// Per-class loss weights from labeled positive/negative counts.
    ///
    /// Errors if some class has no labeled positives or no labeled negatives,
    /// naming the class.
    pub fn compute_class_weights(&self) -> Result<ClassWeights> {
        let stats = self.label_statistics();
        let mut entries = Vec::with_capacity(self.cols);
        for (class, s) in stats.iter().enumerate() {
            if s.positive == 0 {
                return Err(Error::Validation(format!(
                    "class {class} has no labeled positives"
                )));
            }
            if s.negative == 0 {
                return Err(Error::Validation(format!(
                    "class {class} has no labeled negatives"
                )));
            }
            let total = (s.positive + s.negative) as f64;
            entries.push(ClassWeight {
                pos_weight: s.negative as f64 / total,
                neg_weight: s.positive as f64 / total,
                pos_count: s.positive,
                neg_count: s.negative,
            });
        }
        Ok(ClassWeights { entries })
    }

    /// Per-class labeled / positive / negative / missing counts.
    pub fn label_statistics(&self) -> Vec<ClassLabelStats> {
        let mut stats = vec![ClassLabelStats::default(); self.cols];
        for row in 0..self.rows {
            for (col, stat) in stats.iter_mut().enumerate() {
                match self.get(row, col) {
                    LabelValue::Positive => {
                        stat.labeled += 1;
                        stat.positive += 1;
                    }
                    LabelValue::Negative => {
                        stat.labeled += 1;
                        stat.negative += 1;
                    }
                    LabelValue::Missing => stat.missing += 1,
                }
            }
        }
        stats
    }

    /// Check the partial-supervision premises; never aborts, returns every
    /// violation found.
    pub fn validate_partial_dataset(&self, options: &ValidateOptions) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (class, s) in self.label_statistics().iter().enumerate() {
            if s.positive == 0 {
                report.violations.push(Violation::NoLabeledPositives { class });
            }
            if s.negative == 0 {
                report.violations.push(Violation::NoLabeledNegatives { class });
            }
        }
        for row in 0..self.rows {
            let labeled = self.row(row).iter().filter(|e| e.is_labeled()).count();
            if labeled == 0 {
                report.unlabeled_rows.push(row);
                if options.require_labeled_rows {
                    report.violations.push(Violation::UnlabeledSample { row });
                }
            }
            if labeled == self.cols {
                report.fully_labeled_rows.push(row);
                if options.require_partial_rows {
                    report.violations.push(Violation::FullyLabeledRow { row });
                }
            }
        }
        report
    }
}

/// Per-class counts of labeled / positive / negative / missing entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabelStats {
    pub labeled: usize,
    pub positive: usize,
    pub negative: usize,
    pub missing: usize,
}

/// Loss weights for one class: `pos_weight = n_neg / (n_pos + n_neg)` and
/// `neg_weight = n_pos / (n_pos + n_neg)`, counted over labeled entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeight {
    pub pos_weight: f64,
    pub neg_weight: f64,
    pub pos_count: usize,
    pub neg_count: usize,
}

/// Per-class weight table for the weighted BCE loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    entries: Vec<ClassWeight>,
}

impl ClassWeights {
    /// Unit weights (plain BCE) for `k` classes.
    pub fn uniform(k: usize) -> Self {
        Self {
            entries: vec![
                ClassWeight {
                    pos_weight: 1.0,
                    neg_weight: 1.0,
                    pos_count: 0,
                    neg_count: 0,
                };
                k
            ],
        }
    }

    pub fn from_entries(entries: Vec<ClassWeight>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class(&self, k: usize) -> &ClassWeight {
        &self.entries[k]
    }

    pub fn entries(&self) -> &[ClassWeight] {
        &self.entries
    }
}

/// Toggles for [`PartialLabelMatrix::validate_partial_dataset`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Require every row to have at least one missing entry (strict partial
    /// supervision; off by default since Bernoulli masking legitimately
    /// produces fully labeled rows).
    pub require_partial_rows: bool,
    /// Require every row to have at least one labeled entry.
    pub require_labeled_rows: bool,
}

/// A single validity violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    NoLabeledPositives { class: usize },
    NoLabeledNegatives { class: usize },
    UnlabeledSample { row: usize },
    FullyLabeledRow { row: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLabeledPositives { class } => {
                write!(f, "class {class} has no labeled positives")
            }
            Violation::NoLabeledNegatives { class } => {
                write!(f, "class {class} has no labeled negatives")
            }
            Violation::UnlabeledSample { row } => write!(f, "row {row} is an unlabeled sample"),
            Violation::FullyLabeledRow { row } => write!(f, "row {row} is fully labeled"),
        }
    }
}

/// Outcome of a dataset validity check.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Rows with no labeled entry (informational; also a violation when
    /// `require_labeled_rows` is set).
    pub unlabeled_rows: Vec<usize>,
    /// Rows with no missing entry (informational; also a violation when
    /// `require_partial_rows` is set).
    pub fully_labeled_rows: Vec<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}
