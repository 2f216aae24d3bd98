use nalgebra::DMatrix;

use crate::error::{Result, SpicError};
use crate::graphdata::Labels;

/// Supervision targets in the form the losses consume.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Single {
        classes: Vec<usize>,
        num_classes: usize,
    },
    /// n × c matrix of 0.0 / 1.0.
    Multi(DMatrix<f64>),
}

impl Targets {
    pub fn num_classes(&self) -> usize {
        match self {
            Targets::Single { num_classes, .. } => *num_classes,
            Targets::Multi(m) => m.ncols(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Single { classes, .. } => classes.len(),
            Targets::Multi(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl From<&Labels> for Targets {
    fn from(labels: &Labels) -> Self {
        match labels {
            Labels::Single { classes, num_classes } => Targets::Single {
                classes: classes.clone(),
                num_classes: *num_classes,
            },
            Labels::Multi(m) => Targets::Multi(m.map(f64::from)),
        }
    }
}

/// Mean loss over the masked rows and its gradient with respect to the
/// logits: softmax cross-entropy for single-label targets, elementwise
/// sigmoid binary cross-entropy (averaged over rows × classes) for
/// multilabel targets.
pub fn loss_from_logits(logits: &DMatrix<f64>, targets: &Targets, mask: &[bool]) -> Result<(f64, DMatrix<f64>)> {
    let (n, c) = logits.shape();
    if targets.len() != n || mask.len() != n || targets.num_classes() != c {
        return Err(SpicError::Dimension(format!(
            "logits {n}×{c}, {} targets over {} classes, mask of {}",
            targets.len(),
            targets.num_classes(),
            mask.len()
        )));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    if rows.is_empty() {
        return Err(SpicError::EmptyMask("train"));
    }
    let mut grad = DMatrix::zeros(n, c);
    let mut loss = 0.0;
    match targets {
        Targets::Single { classes, .. } => {
            let scale = 1.0 / rows.len() as f64;
            for &i in &rows {
                let row = logits.row(i);
                let max = row.max();
                let total: f64 = row.iter().map(|z| (z - max).exp()).sum();
                let log_total = total.ln() + max;
                loss += log_total - row[classes[i]];
                for j in 0..c {
                    let p = (row[j] - log_total).exp();
                    grad[(i, j)] = scale * (p - if j == classes[i] { 1.0 } else { 0.0 });
                }
            }
            loss *= scale;
        }
        Targets::Multi(y) => {
            let scale = 1.0 / (rows.len() * c) as f64;
            for &i in &rows {
                for j in 0..c {
                    let z = logits[(i, j)];
                    let t = y[(i, j)];
                    loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
                    grad[(i, j)] = scale * (sigmoid(z) - t);
                }
            }
            loss *= scale;
        }
    }
    Ok((loss, grad))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
