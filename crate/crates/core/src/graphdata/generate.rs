//! Synthetic graphs (stochastic block models) and feature-matrix rewrites.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, Labels, Role};
use crate::error::{Result, SpicError};
use crate::rng::{seeded, uniform_matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    /// Nodes per block; the block count is `sizes.len()`.
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub labeled_per_block: usize,
    pub seed: u64,
}

impl SbmSpec {
    pub fn uniform(blocks: usize, size: usize, p_in: f64, p_out: f64, labeled_per_block: usize, seed: u64) -> Self {
        Self {
            sizes: vec![size; blocks],
            p_in,
            p_out,
            labeled_per_block,
            seed,
        }
    }

    pub fn blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Block id of every node, blocks laid out contiguously.
    pub fn block_of_nodes(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(SpicError::InvalidInput("SBM needs at least one block".into()));
        }
        if let Some(b) = self.sizes.iter().position(|&s| s == 0) {
            return Err(SpicError::InvalidInput(format!("SBM block {b} is empty")));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SpicError::InvalidInput(format!("{name} = {p} is not a probability")));
            }
        }
        if self.labeled_per_block == 0 {
            return Err(SpicError::InvalidInput(
                "labeled_per_block must be at least 1 so every class is trained".into(),
            ));
        }
        if let Some((b, &s)) = self.sizes.iter().enumerate().find(|(_, &s)| s < self.labeled_per_block) {
            return Err(SpicError::InvalidInput(format!(
                "block {b} has {s} nodes, fewer than labeled_per_block = {}",
                self.labeled_per_block
            )));
        }
        if self.p_in <= self.p_out {
            log::warn!(
                "p_in = {} does not exceed p_out = {}; communities are not detectable",
                self.p_in,
                self.p_out
            );
        }
        Ok(())
    }
}

/// How node features of a generated graph are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Uniform[0,1) noise plus 1.0 in column `block mod d`.
    OnehotBlockNoisy,
    /// i.i.d. Uniform[0,1); carries no label information.
    RandomUniform,
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "onehot-block-noisy" => Ok(FeatureMode::OnehotBlockNoisy),
            "random-uniform" => Ok(FeatureMode::RandomUniform),
            other => Err(format!(
                "unknown feature mode {other:?} (expected onehot-block-noisy or random-uniform)"
            )),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::OnehotBlockNoisy => "onehot-block-noisy",
            FeatureMode::RandomUniform => "random-uniform",
        })
    }
}

/// Samples a stochastic block model. All randomness comes from `spec.seed`:
/// edges first (pairs `i < j` in row order), then the split, then features.
pub fn generate_sbm(spec: &SbmSpec, d: usize, mode: FeatureMode) -> Result<Graph> {
    spec.validate()?;
    if d == 0 {
        return Err(SpicError::InvalidInput("feature dimension must be at least 1".into()));
    }
    let n = spec.num_nodes();
    let block = spec.block_of_nodes();
    let mut rng = seeded(spec.seed);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let adjacency = Graph::adjacency_from_edges(n, &edges)?;

    let mut roles = vec![Role::None; n];
    let mut unlabeled = Vec::with_capacity(n);
    let mut start = 0;
    for &size in &spec.sizes {
        let mut members: Vec<usize> = (start..start + size).collect();
        members.shuffle(&mut rng);
        for &v in &members[..spec.labeled_per_block] {
            roles[v] = Role::Train;
        }
        unlabeled.extend_from_slice(&members[spec.labeled_per_block..]);
        start += size;
    }
    unlabeled.sort_unstable();
    unlabeled.shuffle(&mut rng);
    let half = unlabeled.len() / 2;
    for (pos, &v) in unlabeled.iter().enumerate() {
        roles[v] = if pos < half { Role::Val } else { Role::Test };
    }

    let mut features = uniform_matrix(&mut rng, n, d);
    if mode == FeatureMode::OnehotBlockNoisy {
        for (i, &b) in block.iter().enumerate() {
            features[(i, b % d)] += 1.0;
        }
    }

    let labels = Labels::Single {
        classes: block,
        num_classes: spec.blocks(),
    };
    Graph::new(adjacency, features, labels, roles)
}

/// Replaces the features with an n × `d_new` Uniform[0,1) matrix.
pub fn randomize_features(g: &Graph, d_new: usize, seed: u64) -> Result<Graph> {
    if d_new == 0 {
        return Err(SpicError::InvalidInput("feature dimension must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    g.with_features(uniform_matrix(&mut rng, g.num_nodes(), d_new))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSelection {
    /// The first `n` columns.
    First(usize),
    /// Explicit column indices, in output order.
    Columns(Vec<usize>),
}

pub fn reduce_features(g: &Graph, keep: &FeatureSelection) -> Result<Graph> {
    let d = g.num_features();
    let cols: Vec<usize> = match keep {
        FeatureSelection::First(k) => {
            if *k > d {
                return Err(SpicError::InvalidInput(format!(
                    "cannot keep {k} of {d} feature columns"
                )));
            }
            (0..*k).collect()
        }
        FeatureSelection::Columns(c) => c.clone(),
    };
    if cols.is_empty() {
        return Err(SpicError::InvalidInput("empty feature selection".into()));
    }
    if let Some(&bad) = cols.iter().find(|&&c| c >= d) {
        return Err(SpicError::InvalidInput(format!(
            "feature index {bad} out of range (d = {d})"
        )));
    }
    let x = g.features();
    g.with_features(DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])]))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Binomial expectation and standard deviation of the edge counts.
    fn binomial(pairs: f64, p: f64) -> (f64, f64) {
        (pairs * p, (pairs * p * (1.0 - p)).sqrt())
    }

    #[test]
    fn sbm_edge_counts_within_four_sigma() {
        for seed in [7u64, 8, 9] {
            let spec = SbmSpec::uniform(2, 200, 0.05, 0.005, 10, seed);
            let g = generate_sbm(&spec, 4, FeatureMode::RandomUniform).unwrap();
            let block = spec.block_of_nodes();
            let (mut intra, mut inter) = (0.0, 0.0);
            for (a, b) in g.edge_list() {
                if block[a] == block[b] {
                    intra += 1.0;
                } else {
                    inter += 1.0;
                }
            }
            // 2·C(200,2) intra pairs, 200·200 inter pairs
            let (mi, si) = binomial(2.0 * 19900.0, 0.05);
            let (mo, so) = binomial(40000.0, 0.005);
            assert!((mi - 1990.0).abs() < 1e-9 && (mo - 200.0).abs() < 1e-9);
            assert!((intra - mi).abs() <= 4.0 * si, "intra {intra} vs {mi}±{si}");
            assert!((inter - mo).abs() <= 4.0 * so, "inter {inter} vs {mo}±{so}");
        }
    }

    #[test]
    fn sbm_split_counts() {
        let spec = SbmSpec::uniform(3, 50, 0.1, 0.01, 5, 1);
        let g = generate_sbm(&spec, 3, FeatureMode::OnehotBlockNoisy).unwrap();
        assert_eq!(g.nodes_with(Role::Train).len(), 15);
        assert_eq!(g.nodes_with(Role::Val).len(), 67);
        assert_eq!(g.nodes_with(Role::Test).len(), 68);
        let classes = match g.labels() {
            Labels::Single { classes, .. } => classes.clone(),
            _ => unreachable!(),
        };
        for b in 0..3 {
            let train_in_block = g.nodes_with(Role::Train).iter().filter(|&&v| classes[v] == b).count();
            assert_eq!(train_in_block, 5);
        }
        // planted column carries +1
        assert!(g.features()[(0, 0)] >= 1.0 && g.features()[(149, 2)] >= 1.0);
    }

    #[test]
    fn empty_graph_when_p_in_zero() {
        let spec = SbmSpec::uniform(1, 30, 0.0, 0.0, 1, 3);
        let g = generate_sbm(&spec, 2, FeatureMode::RandomUniform).unwrap();
        assert_eq!(g.num_nodes(), 30);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn sbm_is_deterministic() {
        let spec = SbmSpec::uniform(2, 60, 0.2, 0.02, 3, 11);
        let a = generate_sbm(&spec, 5, FeatureMode::RandomUniform).unwrap();
        let b = generate_sbm(&spec, 5, FeatureMode::RandomUniform).unwrap();
        assert_eq!(a, b);
        let c = generate_sbm(&SbmSpec { seed: 12, ..spec }, 5, FeatureMode::RandomUniform).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sbm_rejects_small_block() {
        let spec = SbmSpec {
            sizes: vec![10, 3],
            p_in: 0.5,
            p_out: 0.1,
            labeled_per_block: 4,
            seed: 0,
        };
        let err = generate_sbm(&spec, 2, FeatureMode::RandomUniform).unwrap_err();
        assert!(err.to_string().contains("block 1"));
    }

    #[test]
    fn randomize_keeps_topology() {
        let spec = SbmSpec::uniform(2, 20, 0.3, 0.05, 2, 5);
        let g = generate_sbm(&spec, 3, FeatureMode::OnehotBlockNoisy).unwrap();
        let r = randomize_features(&g, 1, 42).unwrap();
        assert_eq!(r.features().shape(), (40, 1));
        assert_eq!(r.adjacency(), g.adjacency());
        assert_eq!(r.labels(), g.labels());
        assert_eq!(r.roles(), g.roles());
        assert!(r.features().iter().all(|&v| (0.0..1.0).contains(&v)));
        assert_eq!(r, randomize_features(&g, 1, 42).unwrap());
        assert_ne!(r.features(), randomize_features(&g, 1, 43).unwrap().features());
    }

    #[test]
    fn reduce_selects_columns() {
        let spec = SbmSpec::uniform(2, 10, 0.3, 0.05, 2, 5);
        let g = generate_sbm(&spec, 4, FeatureMode::RandomUniform).unwrap();
        assert_eq!(reduce_features(&g, &FeatureSelection::First(4)).unwrap(), g);
        let r = reduce_features(&g, &FeatureSelection::Columns(vec![3, 1])).unwrap();
        assert_eq!(r.features()[(5, 0)], g.features()[(5, 3)]);
        assert_eq!(r.features()[(5, 1)], g.features()[(5, 1)]);
        let err = reduce_features(&g, &FeatureSelection::Columns(vec![])).unwrap_err();
        assert!(err.to_string().contains("empty feature selection"));
        assert!(reduce_features(&g, &FeatureSelection::Columns(vec![4])).is_err());
    }
}
