//! Trainable heads on top of the propagation, and the shared-weight
//! nonlinear variants.
//!
//! With `S = βI + Q` the operator of the aggregator:
//!
//! ```text
//! LINEAR   logits = S^k X Ω_F
//! RELU1    X₁ = X Ω_p;  X₂ = ReLU(Q X₁) + β X₁;  logits = S^{k−1} X₂ Ω_F
//! GENERAL  X⁰ = X Ω_p;  Xᵗ = ReLU(Q Xᵗ⁻¹ Ω_R) + β Xᵗ⁻¹  (t = 1..k);  logits = Xᵏ Ω_F
//! W        logits = S^k X Ω_p Ω_R^k Ω_F
//! POLY     logits = (Σ_i θ_i S^i X) Ω_F
//! ```
//!
//! Gradients are written out by hand; [`grad_check`] compares them with
//! central differences.

mod adam;
mod gradcheck;
mod io;
mod loss;
mod model;
mod train;

pub use adam::Adam;
pub use gradcheck::{grad_check, GradCheckDims};
pub use io::{read_params, write_params};
pub(crate) use loss::sigmoid;
pub use loss::{loss_from_logits, Targets};
pub use model::{forward, loss_and_grad, Gradients, Prepared};
pub use train::{train, train_prepared, TrainOutcome};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpicError};
use crate::rng::{symmetric_uniform_matrix, SpicRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Linear,
    Relu1,
    General,
    W,
    Poly,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Linear,
        Variant::Relu1,
        Variant::General,
        Variant::W,
        Variant::Poly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Linear => "linear",
            Variant::Relu1 => "relu1",
            Variant::General => "general",
            Variant::W => "w",
            Variant::Poly => "poly",
        }
    }

    fn has_projection(self) -> bool {
        matches!(self, Variant::Relu1 | Variant::General | Variant::W)
    }

    fn has_recurrent(self) -> bool {
        matches!(self, Variant::General | Variant::W)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant {s:?} (expected linear, relu1, general, w or poly)"))
    }
}

/// Trainable tensors of one model plus the fixed shape of its iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub variant: Variant,
    /// d × h input projection.
    pub omega_p: Option<DMatrix<f64>>,
    /// h × h transform shared by every iteration.
    pub omega_r: Option<DMatrix<f64>>,
    /// Final transform to class scores.
    pub omega_f: DMatrix<f64>,
    /// Polynomial coefficients θ_0..θ_K.
    pub theta: Option<Vec<f64>>,
    pub k: usize,
    pub beta: u32,
}

impl ModelParams {
    /// Uniform ±1/√fan_in initialization; θ starts at 1/(K+1).
    pub fn init(
        variant: Variant,
        d: usize,
        hidden: usize,
        classes: usize,
        k: usize,
        beta: u32,
        rng: &mut SpicRng,
    ) -> Self {
        let mut layer =
            |rows: usize, cols: usize| symmetric_uniform_matrix(rng, rows, cols, 1.0 / (rows as f64).sqrt());
        let omega_p = variant.has_projection().then(|| layer(d, hidden));
        let omega_r = variant.has_recurrent().then(|| layer(hidden, hidden));
        let head_in = if variant.has_projection() { hidden } else { d };
        let omega_f = layer(head_in, classes);
        let theta = (variant == Variant::Poly).then(|| vec![1.0 / (k + 1) as f64; k + 1]);
        Self {
            variant,
            omega_p,
            omega_r,
            omega_f,
            theta,
            k,
            beta,
        }
    }

    /// Width of the hidden representation fed to `Ω_F`.
    pub fn head_inputs(&self) -> usize {
        self.omega_f.nrows()
    }

    pub fn classes(&self) -> usize {
        self.omega_f.ncols()
    }

    /// Checks that the tensors present match the variant and chain together
    /// for `d` input features.
    pub fn validate(&self, d: usize) -> Result<()> {
        let v = self.variant;
        let present = (self.omega_p.is_some(), self.omega_r.is_some(), self.theta.is_some());
        let expected = (v.has_projection(), v.has_recurrent(), v == Variant::Poly);
        if present != expected {
            return Err(SpicError::Dimension(format!(
                "{v} expects (Ω_p, Ω_R, θ) presence {expected:?}, got {present:?}"
            )));
        }
        let mut width = d;
        if let Some(p) = &self.omega_p {
            if p.nrows() != width {
                return Err(SpicError::Dimension(format!(
                    "Ω_p is {}×{}, input has {width} features",
                    p.nrows(),
                    p.ncols()
                )));
            }
            width = p.ncols();
        }
        if let Some(r) = &self.omega_r {
            if r.nrows() != width || r.ncols() != width {
                return Err(SpicError::Dimension(format!(
                    "Ω_R is {}×{}, expected {width}×{width}",
                    r.nrows(),
                    r.ncols()
                )));
            }
        }
        if self.omega_f.nrows() != width {
            return Err(SpicError::Dimension(format!(
                "Ω_F has {} rows, hidden width is {width}",
                self.omega_f.nrows()
            )));
        }
        if let Some(t) = &self.theta {
            if t.len() != self.k + 1 {
                return Err(SpicError::Dimension(format!(
                    "θ has {} coefficients for degree {}",
                    t.len(),
                    self.k
                )));
            }
        }
        if matches!(v, Variant::Relu1 | Variant::General) && self.k == 0 {
            return Err(SpicError::InvalidInput(format!("{v} needs at least one iteration")));
        }
        Ok(())
    }

    /// Trainable tensors in canonical order: Ω_p, Ω_R, Ω_F, θ.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out = Vec::with_capacity(4);
        if let Some(p) = &self.omega_p {
            out.push(("omega_p", p.as_slice()));
        }
        if let Some(r) = &self.omega_r {
            out.push(("omega_r", r.as_slice()));
        }
        out.push(("omega_f", self.omega_f.as_slice()));
        if let Some(t) = &self.theta {
            out.push(("theta", t.as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(4);
        if let Some(p) = &mut self.omega_p {
            out.push(p.as_mut_slice());
        }
        if let Some(r) = &mut self.omega_r {
            out.push(r.as_mut_slice());
        }
        out.push(self.omega_f.as_mut_slice());
        if let Some(t) = &mut self.theta {
            out.push(t.as_mut_slice());
        }
        out
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|(_, t)| t.iter()).map(|v| v * v).sum()
    }
}

/// Optimizer and protocol settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub runs: usize,
    pub seed: u64,
    /// Width h of Ω_p / Ω_R.
    pub hidden: usize,
    /// Sigmoid cut-off for multilabel predictions.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 5e-4,
            epochs: 100,
            runs: 20,
            seed: 0,
            hidden: 64,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.runs == 0 {
            return Err(SpicError::InvalidInput("epochs and runs must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(SpicError::InvalidInput("hidden width must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SpicError::InvalidInput("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(SpicError::InvalidInput("moment decays must lie in [0,1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(SpicError::InvalidInput("weight decay must be nonnegative".into()));
        }
        Ok(())
    }
}
