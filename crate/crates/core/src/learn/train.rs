use std::time::Instant;

use super::adam::Adam;
use super::loss::Targets;
use super::model::Prepared;
use super::{ModelParams, TrainConfig, Variant};
use crate::aggregators::Aggregator;
use crate::bench::metrics::{evaluate, Metric};
use crate::error::{Result, SpicError};
use crate::graphdata::{Graph, Role};
use crate::propagation::default_normalize;
use crate::rng::seeded;

/// Result of one training run, evaluated at the parameters with the best
/// validation metric.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub metric: Metric,
    /// Epoch whose starting parameters were retained (0 = initialization).
    pub best_epoch: usize,
    pub val_metric: f64,
    pub test_metric: f64,
    pub final_loss: f64,
    pub seconds: f64,
}

/// Full-batch Adam on the training nodes for `config.epochs` epochs.
///
/// The model is evaluated before every update and once after the last;
/// the first parameters reaching the best validation metric are kept.
/// Without validation nodes the final parameters are kept.
pub fn train_prepared(prepared: &Prepared, g: &Graph, config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let start = Instant::now();
    let targets = Targets::from(g.labels());
    let metric = Metric::for_targets(&targets);
    let train_mask = g.mask(Role::Train);
    let val_mask = g.mask(Role::Val);
    let test_mask = g.mask(Role::Test);
    let has_val = val_mask.iter().any(|&m| m);
    if !test_mask.iter().any(|&m| m) {
        return Err(SpicError::EmptyMask("test"));
    }

    let mut rng = seeded(seed);
    let mut params = ModelParams::init(
        prepared.variant(),
        prepared.input_width(),
        config.hidden,
        targets.num_classes(),
        prepared.k(),
        prepared.aggregator().shift(),
        &mut rng,
    );
    let mut adam = Adam::new(config.learning_rate, config.beta1, config.beta2, config.adam_eps);

    let mut best: Option<(f64, usize, f64, ModelParams)> = None;
    let mut final_loss = f64::NAN;
    for epoch in 0..=config.epochs {
        let (loss, grads, logits) = prepared.loss_and_grad(&params, &targets, &train_mask, config.weight_decay)?;
        if !loss.is_finite() {
            return Err(SpicError::Divergence { epoch });
        }
        final_loss = loss;
        let val = if has_val {
            evaluate(&logits, &targets, &val_mask, config.threshold)?
        } else {
            epoch as f64
        };
        if best.as_ref().is_none_or(|b| val > b.0) {
            let test = evaluate(&logits, &targets, &test_mask, config.threshold)?;
            best = Some((val, epoch, test, params.clone()));
        }
        if epoch == config.epochs {
            break;
        }
        let grads = grads.tensors();
        adam.step(&mut params.tensors_mut(), &grads);
    }
    let (val, best_epoch, test, params) = best.expect("at least one evaluation");
    Ok(TrainOutcome {
        params,
        metric,
        best_epoch,
        val_metric: if has_val { val } else { f64::NAN },
        test_metric: test,
        final_loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Trains `variant` with `k` iterations of `agg`, using the default
/// normalization rule for the cached propagation.
pub fn train(
    variant: Variant,
    agg: &Aggregator,
    g: &Graph,
    k: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let prepared = Prepared::new(variant, agg, g.features(), k, default_normalize(k))?;
    train_prepared(&prepared, g, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregators::build_dad;
    use crate::graphdata::{Labels, Role};
    use nalgebra::DMatrix;

    /// Two triangles {0,1,2} and {3,4,5} bridged by 2–3; nodes 0 and 5 labeled,
    /// the bridge nodes validate.
    fn triangle_pair() -> Graph {
        let edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)];
        let adj = Graph::adjacency_from_edges(6, &edges).unwrap();
        let labels = Labels::Single {
            classes: vec![0, 0, 0, 1, 1, 1],
            num_classes: 2,
        };
        let roles = vec![Role::Train, Role::Test, Role::Val, Role::Val, Role::Test, Role::Train];
        // one-hot node identities: only the topology can carry the labels
        Graph::new(adj, DMatrix::identity(6, 6), labels, roles).unwrap()
    }

    #[test]
    fn triangle_pair_is_learned() {
        let g = triangle_pair();
        let agg = build_dad(&g);
        let config = TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        };
        let out = train(Variant::Linear, &agg, &g, 2, &config, 0).unwrap();
        assert_eq!(out.val_metric, 1.0);
        assert_eq!(out.test_metric, 1.0);
        assert_eq!(out.metric, Metric::Accuracy);
    }

    #[test]
    fn training_is_deterministic() {
        let g = triangle_pair();
        let agg = build_dad(&g);
        let config = TrainConfig {
            epochs: 20,
            hidden: 4,
            ..TrainConfig::default()
        };
        for v in Variant::ALL {
            let a = train(v, &agg, &g, 2, &config, 3).unwrap();
            let b = train(v, &agg, &g, 2, &config, 3).unwrap();
            assert_eq!(a.params, b.params);
            assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
            assert_eq!((a.best_epoch, a.test_metric), (b.best_epoch, b.test_metric));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let g = triangle_pair();
        let agg = build_dad(&g);
        let config = TrainConfig {
            learning_rate: 1e300,
            epochs: 5,
            ..TrainConfig::default()
        };
        let err = train(Variant::Linear, &agg, &g, 2, &config, 0).unwrap_err();
        assert!(matches!(err, SpicError::Divergence { .. }), "{err}");
    }
}
