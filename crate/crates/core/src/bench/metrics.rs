use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpicError};
use crate::learn::Targets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    MicroF1,
}

impl Metric {
    pub fn for_targets(t: &Targets) -> Self {
        match t {
            Targets::Single { .. } => Metric::Accuracy,
            Targets::Multi(_) => Metric::MicroF1,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::MicroF1 => "micro_f1",
        })
    }
}

/// Fraction of masked rows whose argmax equals the label; ties go to the
/// lowest class index.
pub fn accuracy(logits: &DMatrix<f64>, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if labels.len() != logits.nrows() || mask.len() != logits.nrows() {
        return Err(SpicError::Dimension("logits, labels and mask differ in length".into()));
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        total += 1;
        let row = logits.row(i);
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == labels[i] {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(SpicError::EmptyMask("evaluation"));
    }
    Ok(correct as f64 / total as f64)
}

/// Micro-averaged F1, `2TP / (2TP + FP + FN)` pooled over every masked
/// (node, class) pair; a prediction is positive when `prob ≥ threshold`.
/// Returns 1.0 when there are neither true nor predicted positives.
pub fn micro_f1(probs: &DMatrix<f64>, truth: &DMatrix<f64>, mask: &[bool], threshold: f64) -> Result<f64> {
    if probs.shape() != truth.shape() || mask.len() != probs.nrows() {
        return Err(SpicError::Dimension(
            "probabilities, labels and mask differ in shape".into(),
        ));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let mut any = false;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        any = true;
        for j in 0..probs.ncols() {
            let pred = probs[(i, j)] >= threshold;
            let actual = truth[(i, j)] > 0.5;
            match (pred, actual) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    if !any {
        return Err(SpicError::EmptyMask("evaluation"));
    }
    let denom = 2 * tp + fp + fn_;
    Ok(if denom == 0 {
        1.0
    } else {
        (2 * tp) as f64 / denom as f64
    })
}

/// The task's metric (accuracy or micro-F1) of raw logits.
pub fn evaluate(logits: &DMatrix<f64>, targets: &Targets, mask: &[bool], threshold: f64) -> Result<f64> {
    match targets {
        Targets::Single { classes, .. } => accuracy(logits, classes, mask),
        Targets::Multi(y) => {
            let probs = logits.map(crate::learn::sigmoid);
            micro_f1(&probs, y, mask, threshold)
        }
    }
}
