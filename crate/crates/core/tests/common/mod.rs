//! Helpers shared by the integration test targets. The dense reference here
//! is rebuilt from raw CSR entries with naive loops so it shares no code
//! with the sparse engine or the library's own oracle.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spic::aggregators::{
    build_agnn, build_da, build_dad, build_gat, build_random_laplacian, Aggregator, AttentionParams,
};
use spic::graphdata::{Graph, Labels, Role};

/// Erdős–Rényi graph with a ring added when `connected`, positive features
/// and every node in the training set.
pub fn random_graph(n: usize, p: f64, d: usize, connected: bool, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    if connected && n > 1 {
        edges.extend((0..n).map(|i| (i, (i + 1) % n)).filter(|(a, b)| a != b));
    }
    let adj = Graph::adjacency_from_edges(n, &edges).unwrap();
    let features = DMatrix::from_fn(n, d, |_, _| 0.1 + rng.random::<f64>());
    let c = 2.min(n);
    let labels = Labels::Single {
        classes: (0..n).map(|i| i % c).collect(),
        num_classes: c,
    };
    Graph::new(adj, features, labels, vec![Role::Train; n]).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// One aggregator of every family on `g`.
pub fn all_families(g: &Graph, seed: u64) -> Vec<Aggregator> {
    let attn = AttentionParams::random(g.num_features(), 4, seed).unwrap();
    vec![
        build_dad(g),
        build_da(g),
        build_agnn(g, 1.0).unwrap(),
        build_gat(g, &attn, true).unwrap(),
        build_gat(g, &attn, false).unwrap(),
        build_random_laplacian(g, true, seed),
        build_random_laplacian(g, false, seed),
        Aggregator::identity(g.num_nodes()),
    ]
}

/// `βI + M` as a dense matrix, from the stored CSR triplets.
pub fn dense_operator(agg: &Aggregator) -> DMatrix<f64> {
    let m = agg.matrix();
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for r in 0..n {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            out[(r, c)] += v;
        }
        out[(r, r)] += agg.shift() as f64;
    }
    out
}

pub fn naive_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for t in 0..a.ncols() {
                s += a[(i, t)] * b[(t, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// `S^k X` by repeated naive products.
pub fn naive_power_apply(s: &DMatrix<f64>, x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut y = x.clone();
    for _ in 0..k {
        y = naive_mul(s, &y);
    }
    y
}

pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}
