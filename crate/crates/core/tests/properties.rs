mod common;

use common::*;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use spic::aggregators::{build_da, build_dad, self_looped_pattern, Aggregator, Family};
use spic::graphdata::{load_graph, save_graph};
use spic::learn::{forward, ModelParams, Variant};
use spic::propagation::{appnp_coefficients, appnp_propagate, polynomial_propagate, propagate, spectral_oracle};
use spic::sparse::CsrMatrix;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn sparse_propagation_matches_dense_power(
        n in 1usize..30, p in 0.0f64..0.4, k in 0usize..=8, beta in 0u32..3, seed in any::<u64>()
    ) {
        let g = random_graph(n, p, 3, false, seed);
        let x = random_matrix(n, 3, seed ^ 1);
        for agg in all_families(&g, seed) {
            let agg = agg.with_shift(beta);
            let got = propagate(&agg, &x, k, false).unwrap().values;
            let want = naive_power_apply(&dense_operator(&agg), &x, k);
            let err = rel_frobenius(&got, &want);
            prop_assert!(err <= 1e-8, "{:?} err {err}", agg.family());
        }
    }

    #[test]
    fn shift_fast_path_matches_explicit_diagonal(
        n in 1usize..25, p in 0.0f64..0.5, k in 1usize..6, beta in 1u32..4, seed in any::<u64>()
    ) {
        let g = random_graph(n, p, 2, false, seed);
        let base = build_da(&g);
        let m = base.matrix();
        let mut triplets = Vec::new();
        for r in 0..n {
            let (cols, vals) = m.row(r);
            let mut diag = beta as f64;
            for (&c, &v) in cols.iter().zip(vals) {
                if c == r { diag += v } else { triplets.push((r, c, v)) }
            }
            triplets.push((r, r, diag));
        }
        let explicit = Aggregator::new(CsrMatrix::from_triplets(n, n, &triplets).unwrap(), Family::Identity, false).unwrap();
        let x = random_matrix(n, 2, seed);
        let fast = propagate(&base.with_shift(beta), &x, k, false).unwrap().values;
        let slow = propagate(&explicit, &x, k, false).unwrap().values;
        prop_assert!(rel_frobenius(&fast, &slow) <= 1e-12);
    }

    #[test]
    fn teleport_equals_polynomial(
        n in 2usize..25, p in 0.05f64..0.5, big_k in 1usize..=5, a in 0usize..3, seed in any::<u64>()
    ) {
        let alpha = [0.1, 0.5, 0.9][a];
        let g = random_graph(n, p, 3, true, seed);
        let agg = build_dad(&g);
        let x = random_matrix(n, 3, seed);
        let iter = appnp_propagate(&agg, &x, alpha, big_k).unwrap().values;
        let poly = polynomial_propagate(&agg, &x, &appnp_coefficients(alpha, big_k)).unwrap().values;
        prop_assert!(rel_frobenius(&iter, &poly) <= 1e-10);
        // closed form, with coefficients written out here
        let s = dense_operator(&agg);
        let mut closed = DMatrix::zeros(n, 3);
        for i in 0..=big_k {
            let c = if i < big_k { alpha * (1.0 - alpha).powi(i as i32) } else { (1.0 - alpha).powi(big_k as i32) };
            closed += naive_power_apply(&s, &x, i) * c;
        }
        prop_assert!(rel_frobenius(&iter, &closed) <= 1e-10);
    }

    #[test]
    fn normalization_only_rescales_columns(
        n in 2usize..25, p in 0.05f64..0.5, k in 1usize..12, seed in any::<u64>()
    ) {
        let g = random_graph(n, p, 3, true, seed);
        let agg = build_dad(&g).with_shift(1);
        let x = random_matrix(n, 3, seed);
        let raw = propagate(&agg, &x, k, false).unwrap().values;
        let scaled = propagate(&agg, &x, k, true).unwrap();
        prop_assert!(scaled.normalized);
        for j in 0..3 {
            let (a, b) = (raw.column(j), scaled.values.column(j));
            let ratio = a.dot(&b) / b.norm_squared();
            prop_assert!(ratio > 0.0);
            prop_assert!((a - b * ratio).norm() <= 1e-6 * a.norm());
        }
    }

    #[test]
    fn graph_directory_round_trip(n in 1usize..30, p in 0.0f64..0.5, d in 1usize..5, seed in any::<u64>()) {
        let g = random_graph(n, p, d, false, seed);
        let dir = tempfile::tempdir().unwrap();
        save_graph(&g, dir.path()).unwrap();
        prop_assert_eq!(load_graph(dir.path()).unwrap(), g);
    }

    #[test]
    fn aggregator_structure(n in 1usize..30, p in 0.0f64..0.5, seed in any::<u64>()) {
        let g = random_graph(n, p, 3, false, seed);
        let pattern = self_looped_pattern(&g);
        for agg in all_families(&g, seed) {
            prop_assert!(agg.matrix().pattern_within(&pattern), "{:?}", agg.family());
            if agg.is_symmetric() {
                prop_assert!(agg.matrix().max_asymmetry() <= 1e-12);
            }
            if agg.family().is_row_stochastic() {
                for s in agg.matrix().row_sums() {
                    prop_assert!((s - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn dad_spectrum_in_unit_interval(n in 1usize..60, p in 0.0f64..0.3, seed in any::<u64>()) {
        let g = random_graph(n, p, 1, false, seed);
        let eig = SymmetricEigen::new(dense_operator(&build_dad(&g)));
        let max = eig.eigenvalues.max();
        prop_assert!((max - 1.0).abs() <= 1e-8, "max {max}");
        prop_assert!(eig.eigenvalues.iter().all(|&l| l > -1.0 && l <= 1.0 + 1e-8));
    }

    #[test]
    fn da_eigenvectors_shared_by_shifted_forms(n in 2usize..20, p in 0.1f64..0.6, seed in any::<u64>()) {
        let g = random_graph(n, p, 1, true, seed);
        let da = build_da(&g);
        let spec = spectral_oracle(&da, None).unwrap();
        let m = dense_operator(&da);
        let id = DMatrix::<f64>::identity(n, n);
        for (sign, op) in [(1.0, &id + &m), (-1.0, &id - &m)] {
            for (i, &l) in spec.eigenvalues.iter().enumerate() {
                let v = spec.eigenvectors.column(i);
                let mu = 1.0 + sign * l;
                prop_assert!((&op * v - v * mu).norm() <= 1e-8 * mu.abs().max(1.0));
            }
        }
    }

    #[test]
    fn eigen_expansion_is_linear(n in 2usize..20, p in 0.1f64..0.6, k in 0usize..8, seed in any::<u64>()) {
        let g = random_graph(n, p, 1, true, seed);
        let agg = build_dad(&g);
        let v0: Vec<f64> = random_matrix(n, 1, seed).iter().copied().collect();
        let spec = spectral_oracle(&agg, Some(&v0)).unwrap();
        let c = spec.coefficients.as_ref().unwrap();
        let mut expanded = DMatrix::zeros(n, 1);
        for (i, &l) in spec.eigenvalues.iter().enumerate() {
            expanded += spec.eigenvectors.column(i) * (c[i] * l.powi(k as i32));
        }
        let direct = naive_power_apply(&dense_operator(&agg), &DMatrix::from_column_slice(n, 1, &v0), k);
        prop_assert!((expanded - &direct).norm() <= 1e-8 * direct.norm().max(1.0));
    }

    #[test]
    fn head_absorbs_positive_column_scaling(
        n in 2usize..20, p in 0.1f64..0.5, col in 0usize..3, s in 0.01f64..100.0, seed in any::<u64>()
    ) {
        let g = random_graph(n, p, 3, true, seed);
        let agg = build_dad(&g);
        let emb = propagate(&agg, g.features(), 2, false).unwrap().values;
        let params = ModelParams {
            variant: Variant::Linear,
            omega_p: None,
            omega_r: None,
            omega_f: random_matrix(3, 2, seed),
            theta: None,
            k: 0,
            beta: 0,
        };
        let id = Aggregator::identity(n);
        let base = forward(&id, &emb, &params).unwrap();
        let mut scaled_emb = emb.clone();
        scaled_emb.column_mut(col).scale_mut(s);
        let mut scaled_params = params.clone();
        scaled_params.omega_f.row_mut(col).unscale_mut(s);
        let got = forward(&id, &scaled_emb, &scaled_params).unwrap();
        prop_assert!((got - &base).abs().max() <= 1e-12 * base.abs().max().max(1.0));
    }

    #[test]
    fn relu_variants_collapse_on_nonnegative_input(n in 2usize..20, p in 0.1f64..0.5, k in 1usize..5, seed in any::<u64>()) {
        let g = random_graph(n, p, 3, true, seed);
        let agg = build_dad(&g);
        let omega_f = random_matrix(3, 2, seed);
        let linear = ModelParams { variant: Variant::Linear, omega_p: None, omega_r: None, omega_f: omega_f.clone(), theta: None, k, beta: 0 };
        let general = ModelParams { variant: Variant::General, omega_p: Some(DMatrix::identity(3, 3)), omega_r: Some(DMatrix::identity(3, 3)), ..linear.clone() };
        let relu1 = ModelParams { variant: Variant::Relu1, omega_r: None, ..general.clone() };
        let want = forward(&agg, g.features(), &linear).unwrap();
        for params in [general, relu1] {
            let got = forward(&agg, g.features(), &params).unwrap();
            prop_assert!((got - &want).abs().max() <= 1e-12 * want.abs().max().max(1.0));
        }
    }
}
