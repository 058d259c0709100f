//! Confusion matrix, accuracy, per-class precision/recall/F1 and macro F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(num_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        if let Some(&class) = [t, p].iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidClass { class, num_classes });
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Nothing was predicted as this class; precision was set to 0.
    pub precision_undefined: bool,
    /// The class never occurs; recall was set to 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub per_class: Vec<ClassScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Ratio with the 0/0 → 0 convention; the flag reports the undefined case.
pub(crate) fn safe_ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub(crate) fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

pub fn scores(cm: &ConfusionMatrix) -> Result<Scores> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let per_class: Vec<ClassScores> = (0..cm.num_classes())
        .map(|c| {
            let tp = cm.get(c, c);
            let (precision, precision_undefined) = safe_ratio(tp, cm.col_sum(c));
            let (recall, recall_undefined) = safe_ratio(tp, cm.row_sum(c));
            ClassScores {
                precision,
                recall,
                f1: f1_score(precision, recall),
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let n = per_class.len();
    Ok(Scores {
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(per_class.iter().map(|s| s.precision), n),
        macro_recall: mean(per_class.iter().map(|s| s.recall), n),
        macro_f1: mean(per_class.iter().map(|s| s.f1), n),
        per_class,
    })
}

/// JSON evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<NamedClassScores>,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedClassScores {
    pub class: String,
    #[serde(flatten)]
    pub scores: ClassScores,
}

impl EvalReport {
    pub fn new(cm: &ConfusionMatrix, class_names: &[String]) -> Result<Self> {
        let s = scores(cm)?;
        Ok(EvalReport {
            accuracy: s.accuracy,
            per_class: class_names
                .iter()
                .cloned()
                .zip(s.per_class)
                .map(|(class, scores)| NamedClassScores { class, scores })
                .collect(),
            macro_f1: s.macro_f1,
            confusion: cm.rows().to_vec(),
        })
    }
}
