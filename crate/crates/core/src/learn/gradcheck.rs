use rand::Rng;

use super::loss::Targets;
use super::model::Prepared;
use super::{ModelParams, Variant};
use crate::aggregators::build_dad;
use crate::error::{Result, SpicError};
use crate::graphdata::{Graph, Labels, Role};
use crate::rng::{seeded, uniform_matrix};

/// Central-difference step.
const STEP: f64 = 1e-4;
/// Denominator floor of the relative error.
const REL_FLOOR: f64 = 1e-6;
/// Minimum distance of every ReLU input from the kink, so that a `STEP`
/// perturbation never changes the activation pattern.
const KINK_MARGIN: f64 = 2e-3;
const WEIGHT_DECAY: f64 = 5e-4;

/// Size of the random instance used by [`grad_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradCheckDims {
    pub nodes: usize,
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
    pub k: usize,
    pub beta: u32,
    pub multilabel: bool,
}

impl Default for GradCheckDims {
    fn default() -> Self {
        Self {
            nodes: 12,
            features: 5,
            hidden: 4,
            classes: 3,
            k: 3,
            beta: 1,
            multilabel: false,
        }
    }
}

fn random_instance(dims: &GradCheckDims, seed: u64) -> Result<Graph> {
    let n = dims.nodes;
    let mut rng = seeded(seed);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).filter(|(a, b)| a != b).collect();
    for i in 0..n {
        for j in i + 2..n {
            if rng.random::<f64>() < 0.2 {
                edges.push((i, j));
            }
        }
    }
    let adj = Graph::adjacency_from_edges(n, &edges)?;
    let x = uniform_matrix(&mut rng, n, dims.features);
    let roles: Vec<Role> = (0..n)
        .map(|i| if i % 2 == 0 { Role::Train } else { Role::Test })
        .collect();
    let labels = if dims.multilabel {
        Labels::Multi(nalgebra::DMatrix::from_fn(n, dims.classes, |_, _| {
            u8::from(rng.random::<bool>())
        }))
    } else {
        // cycle the classes over the training nodes so every class is present
        Labels::Single {
            classes: (0..n).map(|i| (i / 2) % dims.classes).collect(),
            num_classes: dims.classes,
        }
    };
    Graph::new(adj, x, labels, roles)
}

/// Largest relative difference `|a − f| / max(|a|, |f|, 1e-6)` between the
/// analytic gradient `a` and the central difference `f` (step 1e-4) over
/// every trainable entry, on a random instance with a shifted DAD
/// aggregator and weight decay. Parameter draws that put a ReLU input
/// within 2e-3 of zero are rejected and redrawn.
pub fn grad_check(variant: Variant, dims: &GradCheckDims, seed: u64) -> Result<f64> {
    if dims.nodes < 2 || dims.nodes > 30 {
        return Err(SpicError::InvalidInput(
            "gradient check instances need 2..=30 nodes".into(),
        ));
    }
    let g = random_instance(dims, seed)?;
    let agg = build_dad(&g).with_shift(dims.beta);
    let prepared = Prepared::new(variant, &agg, g.features(), dims.k, false)?;
    let targets = Targets::from(g.labels());
    let mask = g.mask(Role::Train);

    let mut rng = seeded(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut params = None;
    for _ in 0..10_000 {
        let mut p = ModelParams::init(
            variant,
            dims.features,
            dims.hidden,
            dims.classes,
            dims.k,
            dims.beta,
            &mut rng,
        );
        if let Some(t) = &mut p.theta {
            for v in t.iter_mut() {
                *v = rng.random::<f64>() - 0.25;
            }
        }
        let (_, tape) = prepared.forward_tape(&p)?;
        if tape.min_abs_preactivation() >= KINK_MARGIN {
            params = Some(p);
            break;
        }
    }
    let params =
        params.ok_or_else(|| SpicError::InvalidInput("no parameter draw kept ReLU inputs away from zero".into()))?;

    let (_, grads, _) = prepared.loss_and_grad(&params, &targets, &mask, WEIGHT_DECAY)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let loss_at = |p: &ModelParams| -> Result<f64> { Ok(prepared.loss_and_grad(p, &targets, &mask, WEIGHT_DECAY)?.0) };

    let mut worst = 0.0f64;
    for (t, tensor) in analytic.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let mut plus = params.clone();
            plus.tensors_mut()[t][i] += STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[t][i] -= STEP;
            let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_tight() {
        let err = grad_check(Variant::Linear, &GradCheckDims::default(), 1).unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn general_k3() {
        let err = grad_check(Variant::General, &GradCheckDims::default(), 2).unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn poly_k3() {
        let err = grad_check(Variant::Poly, &GradCheckDims::default(), 3).unwrap();
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn multilabel_heads() {
        let dims = GradCheckDims {
            multilabel: true,
            ..GradCheckDims::default()
        };
        for v in Variant::ALL {
            let err = grad_check(v, &dims, 4).unwrap();
            assert!(err <= 1e-4, "{v}: {err}");
        }
    }

    #[test]
    fn rejects_large_instances() {
        let dims = GradCheckDims {
            nodes: 31,
            ..GradCheckDims::default()
        };
        assert!(grad_check(Variant::Linear, &dims, 0).is_err());
    }
}
