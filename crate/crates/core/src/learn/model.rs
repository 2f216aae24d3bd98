use nalgebra::DMatrix;

use super::loss::{loss_from_logits, Targets};
use super::{ModelParams, Variant};
use crate::aggregators::Aggregator;
use crate::error::{Result, SpicError};
use crate::propagation::propagate;

/// Gradients laid out like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub omega_p: Option<DMatrix<f64>>,
    pub omega_r: Option<DMatrix<f64>>,
    pub omega_f: DMatrix<f64>,
    pub theta: Option<Vec<f64>>,
}

impl Gradients {
    /// Same order as [`ModelParams::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(4);
        if let Some(p) = &self.omega_p {
            out.push(p.as_slice());
        }
        if let Some(r) = &self.omega_r {
            out.push(r.as_slice());
        }
        out.push(self.omega_f.as_slice());
        if let Some(t) = &self.theta {
            out.push(t.as_slice());
        }
        out
    }

    fn add_weight_decay(&mut self, params: &ModelParams, wd: f64) {
        if wd == 0.0 {
            return;
        }
        if let (Some(g), Some(p)) = (&mut self.omega_p, &params.omega_p) {
            *g += p * wd;
        }
        if let (Some(g), Some(p)) = (&mut self.omega_r, &params.omega_r) {
            *g += p * wd;
        }
        self.omega_f += &params.omega_f * wd;
        if let (Some(g), Some(p)) = (&mut self.theta, &params.theta) {
            for (gi, pi) in g.iter_mut().zip(p) {
                *gi += wd * pi;
            }
        }
    }
}

/// Parameter-independent inputs of a model.
#[derive(Debug, Clone)]
enum Inputs {
    /// `S^k X` (LINEAR, W) or any externally propagated embedding (LINEAR).
    Embedded(DMatrix<f64>),
    /// `S^i X` for `i = 0..=K` (POLY).
    Powers(Vec<DMatrix<f64>>),
    /// Raw `X`; the iteration depends on the parameters (RELU1, GENERAL).
    Raw(DMatrix<f64>),
}

/// Intermediate values of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Tape {
    /// Representation fed to `Ω_F`.
    hidden: DMatrix<f64>,
    /// ReLU inputs, in iteration order.
    pre: Vec<DMatrix<f64>>,
    /// GENERAL: `Q Xᵗ⁻¹`; W: `Y Ω_R^j` for `j = 0..k`.
    chain: Vec<DMatrix<f64>>,
}

impl Tape {
    /// Smallest |ReLU input|; infinite when the model has no ReLU.
    pub(crate) fn min_abs_preactivation(&self) -> f64 {
        self.pre
            .iter()
            .flat_map(|m| m.iter())
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
    }
}

/// A model bound to an aggregator and feature matrix, with every
/// parameter-independent propagation done up front.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    variant: Variant,
    agg: &'a Aggregator,
    k: usize,
    inputs: Inputs,
}

impl<'a> Prepared<'a> {
    /// `normalize` applies the per-iteration column scaling to the cached
    /// `S^k X` of LINEAR and W; the other variants ignore it.
    pub fn new(variant: Variant, agg: &'a Aggregator, x: &DMatrix<f64>, k: usize, normalize: bool) -> Result<Self> {
        if x.nrows() != agg.size() {
            return Err(SpicError::Dimension(format!(
                "feature matrix has {} rows, aggregator has {} nodes",
                x.nrows(),
                agg.size()
            )));
        }
        let inputs = match variant {
            Variant::Linear | Variant::W => Inputs::Embedded(propagate(agg, x, k, normalize)?.values),
            Variant::Poly => {
                let mut powers = Vec::with_capacity(k + 1);
                powers.push(x.clone());
                for i in 1..=k {
                    let next = agg.apply(&powers[i - 1]);
                    if next.iter().any(|v| !v.is_finite()) {
                        return Err(SpicError::NonFinite { iteration: i });
                    }
                    powers.push(next);
                }
                Inputs::Powers(powers)
            }
            Variant::Relu1 | Variant::General => {
                if k == 0 {
                    return Err(SpicError::InvalidInput(format!(
                        "{variant} needs at least one iteration"
                    )));
                }
                Inputs::Raw(x.clone())
            }
        };
        Ok(Self {
            variant,
            agg,
            k,
            inputs,
        })
    }

    /// LINEAR head over an already propagated embedding (e.g. the teleporting
    /// propagation).
    pub fn from_embedding(agg: &'a Aggregator, embedding: DMatrix<f64>, k: usize) -> Result<Self> {
        if embedding.nrows() != agg.size() {
            return Err(SpicError::Dimension(
                "embedding rows differ from aggregator size".into(),
            ));
        }
        Ok(Self {
            variant: Variant::Linear,
            agg,
            k,
            inputs: Inputs::Embedded(embedding),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn aggregator(&self) -> &Aggregator {
        self.agg
    }

    /// Columns of the matrix the first trainable tensor multiplies.
    pub fn input_width(&self) -> usize {
        match &self.inputs {
            Inputs::Embedded(e) | Inputs::Raw(e) => e.ncols(),
            Inputs::Powers(p) => p[0].ncols(),
        }
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        if params.variant != self.variant {
            return Err(SpicError::Dimension(format!(
                "parameters are for {}, model is {}",
                params.variant, self.variant
            )));
        }
        if params.k != self.k || params.beta != self.agg.shift() {
            return Err(SpicError::Dimension(format!(
                "parameters record k={}, β={}; model runs k={}, β={}",
                params.k,
                params.beta,
                self.k,
                self.agg.shift()
            )));
        }
        params.validate(self.input_width())
    }

    pub fn forward(&self, params: &ModelParams) -> Result<DMatrix<f64>> {
        Ok(self.forward_tape(params)?.0)
    }

    pub(crate) fn forward_tape(&self, params: &ModelParams) -> Result<(DMatrix<f64>, Tape)> {
        self.check(params)?;
        let beta = self.agg.shift() as f64;
        let mut pre = Vec::new();
        let mut chain = Vec::new();
        let hidden = match (&self.inputs, self.variant) {
            (Inputs::Embedded(e), Variant::Linear) => e.clone(),
            (Inputs::Embedded(e), Variant::W) => {
                let r = params.omega_r.as_ref().expect("validated");
                let mut cur = e * params.omega_p.as_ref().expect("validated");
                for _ in 0..self.k {
                    let next = &cur * r;
                    chain.push(cur);
                    cur = next;
                }
                cur
            }
            (Inputs::Powers(powers), Variant::Poly) => {
                let theta = params.theta.as_ref().expect("validated");
                let mut acc = &powers[0] * theta[0];
                for (p, &t) in powers.iter().zip(theta).skip(1) {
                    acc += p * t;
                }
                acc
            }
            (Inputs::Raw(x), Variant::Relu1) => {
                let x1 = x * params.omega_p.as_ref().expect("validated");
                let z = self.agg.apply_unshifted(&x1);
                let mut cur = relu(&z);
                if beta != 0.0 {
                    cur += &x1 * beta;
                }
                pre.push(z);
                for _ in 1..self.k {
                    cur = self.agg.apply(&cur);
                }
                cur
            }
            (Inputs::Raw(x), Variant::General) => {
                let r = params.omega_r.as_ref().expect("validated");
                let mut cur = x * params.omega_p.as_ref().expect("validated");
                for _ in 0..self.k {
                    let qx = self.agg.apply_unshifted(&cur);
                    let z = &qx * r;
                    let mut next = relu(&z);
                    if beta != 0.0 {
                        next += &cur * beta;
                    }
                    chain.push(qx);
                    pre.push(z);
                    cur = next;
                }
                cur
            }
            _ => unreachable!("inputs are built for the variant"),
        };
        let logits = &hidden * &params.omega_f;
        Ok((logits, Tape { hidden, pre, chain }))
    }

    /// Gradients of the loss given `d_logits = ∂L/∂logits`.
    pub(crate) fn backward(&self, params: &ModelParams, tape: &Tape, d_logits: &DMatrix<f64>) -> Gradients {
        let beta = self.agg.shift() as f64;
        let omega_f = tape.hidden.transpose() * d_logits;
        let d_hidden = d_logits * params.omega_f.transpose();
        let mut grads = Gradients {
            omega_p: None,
            omega_r: None,
            omega_f,
            theta: None,
        };
        match (&self.inputs, self.variant) {
            (Inputs::Embedded(_), Variant::Linear) => {}
            (Inputs::Embedded(e), Variant::W) => {
                let r = params.omega_r.as_ref().expect("validated");
                let mut g_r = DMatrix::zeros(r.nrows(), r.ncols());
                let mut g = d_hidden;
                for prev in tape.chain.iter().rev() {
                    g_r += prev.transpose() * &g;
                    g = &g * r.transpose();
                }
                grads.omega_p = Some(e.transpose() * g);
                grads.omega_r = Some(g_r);
            }
            (Inputs::Powers(powers), Variant::Poly) => {
                grads.theta = Some(powers.iter().map(|p| p.dot(&d_hidden)).collect());
            }
            (Inputs::Raw(x), Variant::Relu1) => {
                let mut g = d_hidden;
                for _ in 1..self.k {
                    g = self.agg.apply_transpose(&g);
                }
                let g_pre = relu_mask(&g, &tape.pre[0]);
                let mut g_x1 = self.agg.apply_unshifted_transpose(&g_pre);
                if beta != 0.0 {
                    g_x1 += &g * beta;
                }
                grads.omega_p = Some(x.transpose() * g_x1);
            }
            (Inputs::Raw(x), Variant::General) => {
                let r = params.omega_r.as_ref().expect("validated");
                let mut g_r = DMatrix::zeros(r.nrows(), r.ncols());
                let mut g = d_hidden;
                for (qx, z) in tape.chain.iter().zip(&tape.pre).rev() {
                    let g_pre = relu_mask(&g, z);
                    g_r += qx.transpose() * &g_pre;
                    let mut prev = self.agg.apply_unshifted_transpose(&(&g_pre * r.transpose()));
                    if beta != 0.0 {
                        prev += &g * beta;
                    }
                    g = prev;
                }
                grads.omega_p = Some(x.transpose() * g);
                grads.omega_r = Some(g_r);
            }
            _ => unreachable!("inputs are built for the variant"),
        }
        grads
    }

    /// Loss (with `½·wd·‖params‖²`), its gradients, and the logits.
    pub fn loss_and_grad(
        &self,
        params: &ModelParams,
        targets: &Targets,
        train_mask: &[bool],
        weight_decay: f64,
    ) -> Result<(f64, Gradients, DMatrix<f64>)> {
        let (logits, tape) = self.forward_tape(params)?;
        let (data_loss, d_logits) = loss_from_logits(&logits, targets, train_mask)?;
        let mut grads = self.backward(params, &tape, &d_logits);
        grads.add_weight_decay(params, weight_decay);
        let loss = data_loss + 0.5 * weight_decay * params.squared_norm();
        Ok((loss, grads, logits))
    }
}

fn relu(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// `g ⊙ 1[z > 0]`
fn relu_mask(g: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    g.zip_map(z, |gv, zv| if zv > 0.0 { gv } else { 0.0 })
}

/// Logits of `params.variant` on `(agg, x)`; pre-activation, no softmax.
pub fn forward(agg: &Aggregator, x: &DMatrix<f64>, params: &ModelParams) -> Result<DMatrix<f64>> {
    Prepared::new(params.variant, agg, x, params.k, false)?.forward(params)
}

/// Loss and gradients for one set of parameters; see [`Prepared::loss_and_grad`].
pub fn loss_and_grad(
    agg: &Aggregator,
    x: &DMatrix<f64>,
    targets: &Targets,
    train_mask: &[bool],
    params: &ModelParams,
    weight_decay: f64,
) -> Result<(f64, Gradients)> {
    let prepared = Prepared::new(params.variant, agg, x, params.k, false)?;
    let (loss, grads, _) = prepared.loss_and_grad(params, targets, train_mask, weight_decay)?;
    Ok((loss, grads))
}
