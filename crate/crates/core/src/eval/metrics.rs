use serde::Serialize;
use thiserror::Error;

use crate::event::Label;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("truth has {truth} labels but predictions have {predicted}")]
pub struct LengthMismatch {
    pub truth: usize,
    pub predicted: usize,
}

/// Binary confusion counts oriented to `positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub positive: Label,
    #[serde(rename = "tp")]
    pub true_positive: usize,
    #[serde(rename = "fp")]
    pub false_positive: usize,
    #[serde(rename = "tn")]
    pub true_negative: usize,
    #[serde(rename = "fn")]
    pub false_negative: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    /// The same predictions seen from the other class.
    pub fn swapped(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            positive: self.positive.other(),
            true_positive: self.true_negative,
            false_positive: self.false_negative,
            true_negative: self.true_positive,
            false_negative: self.false_positive,
        }
    }
}

pub fn confusion(truth: &[Label], pred: &[Label], positive: Label) -> Result<ConfusionMatrix, LengthMismatch> {
    if truth.len() != pred.len() {
        return Err(LengthMismatch { truth: truth.len(), predicted: pred.len() });
    }
    let mut m = ConfusionMatrix {
        positive,
        true_positive: 0,
        false_positive: 0,
        true_negative: 0,
        false_negative: 0,
    };
    for (t, p) in truth.iter().zip(pred) {
        match (*t == positive, *p == positive) {
            (true, true) => m.true_positive += 1,
            (false, true) => m.false_positive += 1,
            (false, false) => m.true_negative += 1,
            (true, false) => m.false_negative += 1,
        }
    }
    Ok(m)
}

// Every metric is 0.0 when its denominator is 0.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(m: &ConfusionMatrix) -> f64 {
    ratio(m.true_positive, m.true_positive + m.false_positive)
}

pub fn recall(m: &ConfusionMatrix) -> f64 {
    ratio(m.true_positive, m.true_positive + m.false_negative)
}

/// Harmonic mean of precision and recall.
pub fn f1(precision: f64, recall: f64) -> f64 {
    let sum = precision + recall;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / sum
    }
}

pub fn accuracy(m: &ConfusionMatrix) -> f64 {
    ratio(m.true_positive + m.true_negative, m.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl MetricsRow {
    pub fn from_matrix(m: &ConfusionMatrix) -> Self {
        let p = precision(m);
        let r = recall(m);
        MetricsRow { precision: p, recall: r, f1: f1(p, r), accuracy: accuracy(m) }
    }
}

/// Arithmetic mean of per-class rows.
///
/// For a binary problem every class row carries the same (pooled) accuracy,
/// so the mean accuracy equals the pooled one.
pub fn macro_average(rows: &[MetricsRow]) -> MetricsRow {
    if rows.is_empty() {
        return MetricsRow { precision: 0.0, recall: 0.0, f1: 0.0, accuracy: 0.0 };
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    MetricsRow {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        accuracy: mean(|r| r.accuracy),
    }
}
