//! Power iteration `(βI + M)^k X` and its teleporting / polynomial relatives.

mod oracle;

pub use oracle::{
    convergence_report, dense_power_apply, spectral_oracle, spectral_oracle_with_cap, SpectralDecomposition,
    DEFAULT_ORACLE_CAP,
};

use nalgebra::DMatrix;

use crate::aggregators::{Aggregator, Family};
use crate::error::{Result, SpicError};

/// Propagated features together with how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: DMatrix<f64>,
    pub k: usize,
    pub beta: u32,
    pub normalized: bool,
    pub source_family: Family,
}

/// Default for the per-iteration column scaling: on once `k` exceeds 5.
pub fn default_normalize(k: usize) -> bool {
    k > 5
}

fn check_rows(agg: &Aggregator, x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != agg.size() {
        return Err(SpicError::Dimension(format!(
            "feature matrix has {} rows, aggregator has {} nodes",
            x.nrows(),
            agg.size()
        )));
    }
    Ok(())
}

fn ensure_finite(x: &DMatrix<f64>, iteration: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SpicError::NonFinite { iteration })
    }
}

/// Divides each column by its largest absolute entry (zero columns untouched).
pub fn scale_columns_by_max_abs(x: &mut DMatrix<f64>) {
    for mut col in x.column_iter_mut() {
        let m = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 {
            col /= m;
        }
    }
}

/// `(βI + M)^k X` by `k` sparse applications.
pub fn propagate(agg: &Aggregator, x: &DMatrix<f64>, k: usize, normalize: bool) -> Result<Embedding> {
    check_rows(agg, x)?;
    let mut cur = x.clone();
    for it in 1..=k {
        cur = agg.apply(&cur);
        ensure_finite(&cur, it)?;
        if normalize {
            scale_columns_by_max_abs(&mut cur);
        }
    }
    Ok(Embedding {
        values: cur,
        k,
        beta: agg.shift(),
        normalized: normalize,
        source_family: agg.family(),
    })
}

/// Teleporting propagation `X^t = (1−α) M X^{t−1} + α X^0`, `t = 1..K`.
pub fn appnp_propagate(agg: &Aggregator, x: &DMatrix<f64>, alpha: f64, k: usize) -> Result<Embedding> {
    check_rows(agg, x)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SpicError::InvalidInput(format!("alpha must be in (0,1), got {alpha}")));
    }
    if k == 0 {
        return Err(SpicError::InvalidInput("APPNP needs at least one iteration".into()));
    }
    let teleport = x * alpha;
    let mut cur = x.clone();
    for it in 1..=k {
        cur = agg.apply(&cur) * (1.0 - alpha) + &teleport;
        ensure_finite(&cur, it)?;
    }
    Ok(Embedding {
        values: cur,
        k,
        beta: agg.shift(),
        normalized: false,
        source_family: agg.family(),
    })
}

/// `Σ_{i=0..K} θ_i M^i X` by Horner's rule (`K` sparse applications).
pub fn polynomial_propagate(agg: &Aggregator, x: &DMatrix<f64>, theta: &[f64]) -> Result<Embedding> {
    check_rows(agg, x)?;
    let Some((&last, rest)) = theta.split_last() else {
        return Err(SpicError::InvalidInput(
            "polynomial needs at least one coefficient".into(),
        ));
    };
    let mut acc = x * last;
    for (step, &t) in rest.iter().rev().enumerate() {
        acc = agg.apply(&acc) + x * t;
        ensure_finite(&acc, step + 1)?;
    }
    Ok(Embedding {
        values: acc,
        k: rest.len(),
        beta: agg.shift(),
        normalized: false,
        source_family: agg.family(),
    })
}

/// The coefficients of the unrolled `K`-step teleporting propagation:
/// `α(1−α)^i` for `i < K` and `(1−α)^K` last.
pub fn appnp_coefficients(alpha: f64, k: usize) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..k).map(|i| alpha * (1.0 - alpha).powi(i as i32)).collect();
    theta.push((1.0 - alpha).powi(k as i32));
    theta
}
