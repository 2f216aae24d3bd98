//! Graphs: topology, node features, labels and train/val/test roles.

mod generate;
mod io;

pub use generate::{generate_sbm, randomize_features, reduce_features, FeatureMode, FeatureSelection, SbmSpec};
pub use io::{load_graph, save_graph};

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Result, SpicError};
use crate::sparse::CsrMatrix;

/// Role of a node in the semi-supervised split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Val,
    Test,
    None,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Test => "test",
            Role::None => "none",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Role::Train),
            "val" => Ok(Role::Val),
            "test" => Ok(Role::Test),
            "none" => Ok(Role::None),
            other => Err(format!("unknown mask token {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// One class id per node.
    Single { classes: Vec<usize>, num_classes: usize },
    /// n × c indicator matrix.
    Multi(DMatrix<u8>),
}

impl Labels {
    pub fn num_classes(&self) -> usize {
        match self {
            Labels::Single { num_classes, .. } => *num_classes,
            Labels::Multi(m) => m.ncols(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Single { classes, .. } => classes.len(),
            Labels::Multi(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_multilabel(&self) -> bool {
        matches!(self, Labels::Multi(_))
    }
}

/// An undirected, unweighted-by-default graph with dense node features.
///
/// The adjacency never stores self-loops; aggregators add `I` themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: CsrMatrix,
    features: DMatrix<f64>,
    labels: Labels,
    roles: Vec<Role>,
}

impl Graph {
    /// Assembles a graph and checks every structural invariant.
    pub fn new(adjacency: CsrMatrix, features: DMatrix<f64>, labels: Labels, roles: Vec<Role>) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 {
            return Err(SpicError::InvalidInput("graph has no nodes".into()));
        }
        if adjacency.ncols() != n {
            return Err(SpicError::Dimension("adjacency is not square".into()));
        }
        for r in 0..n {
            if adjacency.row(r).0.binary_search(&r).is_ok() {
                return Err(SpicError::InvalidInput(format!("self-loop stored at node {r}")));
            }
        }
        if adjacency.max_asymmetry() != 0.0 {
            return Err(SpicError::InvalidInput("adjacency is not symmetric".into()));
        }
        if features.nrows() != n {
            return Err(SpicError::Dimension(format!(
                "feature matrix has {} rows for {n} nodes",
                features.nrows()
            )));
        }
        if labels.len() != n || roles.len() != n {
            return Err(SpicError::Dimension(format!(
                "labels ({}) and masks ({}) must both have {n} entries",
                labels.len(),
                roles.len()
            )));
        }
        if let Labels::Single { classes, num_classes } = &labels {
            if let Some((i, &c)) = classes.iter().enumerate().find(|(_, &c)| c >= *num_classes) {
                return Err(SpicError::InvalidInput(format!(
                    "label {c} of node {i} outside 0..{num_classes}"
                )));
            }
            let mut seen = vec![false; *num_classes];
            for (i, &c) in classes.iter().enumerate() {
                if roles[i] == Role::Train {
                    seen[c] = true;
                }
            }
            if let Some(c) = seen.iter().position(|s| !s) {
                return Err(SpicError::InvalidInput(format!("class {c} has no training node")));
            }
        }
        Ok(Self {
            adjacency,
            features,
            labels,
            roles,
        })
    }

    /// Builds an unweighted adjacency from undirected edge pairs, mirroring
    /// each pair and collapsing duplicates.
    pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<CsrMatrix> {
        let mut trip = Vec::with_capacity(edges.len() * 2);
        for &(a, b) in edges {
            if a == b {
                return Err(SpicError::InvalidInput(format!("self-loop at node {a}")));
            }
            trip.push((a, b, 1.0));
            trip.push((b, a, 1.0));
        }
        CsrMatrix::from_triplets(n, n, &trip)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    /// Undirected edge count (each stored pair counted once).
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency.row(node).0.len()
    }

    /// Node ids holding `role`, ascending.
    pub fn nodes_with(&self, role: Role) -> Vec<usize> {
        self.mask(role)
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn mask(&self, role: Role) -> Vec<bool> {
        self.roles.iter().map(|&r| r == role).collect()
    }

    /// Copy with the feature matrix replaced; topology, labels and roles kept.
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes() {
            return Err(SpicError::Dimension(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                self.num_nodes()
            )));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Each undirected edge once, as (low, high).
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for r in 0..self.num_nodes() {
            for &c in self.adjacency.row(r).0 {
                if r < c {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Graph with the given edges, all-ones features of width `d`, and
    /// labels `i % c` with every node in the training split.
    pub fn simple(n: usize, edges: &[(usize, usize)], d: usize, c: usize) -> Graph {
        let adj = Graph::adjacency_from_edges(n, edges).unwrap();
        let labels = Labels::Single {
            classes: (0..n).map(|i| i % c).collect(),
            num_classes: c,
        };
        Graph::new(adj, DMatrix::from_element(n, d, 1.0), labels, vec![Role::Train; n]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_stores_six_entries() {
        let g = fixtures::simple(3, &[(0, 1), (1, 2), (0, 2)], 2, 2);
        assert_eq!(g.adjacency().nnz(), 6);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.edge_list(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn rejects_missing_train_class() {
        let adj = Graph::adjacency_from_edges(2, &[(0, 1)]).unwrap();
        let labels = Labels::Single {
            classes: vec![0, 1],
            num_classes: 2,
        };
        let err = Graph::new(adj, DMatrix::zeros(2, 1), labels, vec![Role::Train, Role::Test]);
        assert!(matches!(err, Err(SpicError::InvalidInput(m)) if m.contains("class 1")));
    }

    #[test]
    fn rejects_self_loop_edge() {
        assert!(Graph::adjacency_from_edges(3, &[(1, 1)]).is_err());
    }

    #[test]
    fn role_tokens() {
        for r in [Role::Train, Role::Val, Role::Test, Role::None] {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), r);
        }
        assert!("training".parse::<Role>().is_err());
    }
}
