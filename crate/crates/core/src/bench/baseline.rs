//! Reference classifiers that need no training.

use nalgebra::DMatrix;

use crate::aggregators::build_dad;
use crate::error::{Result, SpicError};
use crate::graphdata::{Graph, Labels, Role};
use crate::propagation::spectral_oracle;

fn single_labels(g: &Graph) -> Result<(&[usize], usize)> {
    match g.labels() {
        Labels::Single { classes, num_classes } => Ok((classes, *num_classes)),
        Labels::Multi(_) => Err(SpicError::InvalidInput("baseline needs single-label targets".into())),
    }
}

fn test_accuracy(g: &Graph, classes: &[usize], predict: impl Fn(usize) -> usize) -> Result<f64> {
    let test = g.nodes_with(Role::Test);
    if test.is_empty() {
        return Err(SpicError::EmptyMask("test"));
    }
    let correct = test.iter().filter(|&&i| predict(i) == classes[i]).count();
    Ok(correct as f64 / test.len() as f64)
}

/// Test accuracy of always predicting the most frequent training class
/// (ties: lowest index).
pub fn majority_baseline_accuracy(g: &Graph) -> Result<f64> {
    let (classes, c) = single_labels(g)?;
    let mut counts = vec![0usize; c];
    for i in g.nodes_with(Role::Train) {
        counts[classes[i]] += 1;
    }
    let mut best = 0;
    for j in 1..c {
        if counts[j] > counts[best] {
            best = j;
        }
    }
    test_accuracy(g, classes, |_| best)
}

/// Test accuracy of spectral clustering through the dense oracle: nodes are
/// embedded by the `c` eigenvectors of DAD with the largest eigenvalues,
/// rows scaled to unit length, and assigned to the nearest training-class
/// centroid. Ignores node features.
pub fn spectral_baseline_accuracy(g: &Graph) -> Result<f64> {
    let (classes, c) = single_labels(g)?;
    let decomposition = spectral_oracle(&build_dad(g), None)?;
    let mut order: Vec<usize> = (0..decomposition.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| decomposition.eigenvalues[b].total_cmp(&decomposition.eigenvalues[a]));
    let n = g.num_nodes();
    let width = c.min(n);
    let mut embedding = DMatrix::zeros(n, width);
    for (col, &idx) in order.iter().take(width).enumerate() {
        embedding.set_column(col, &decomposition.eigenvectors.column(idx));
    }
    for mut row in embedding.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let mut centroids = DMatrix::zeros(c, width);
    let mut counts = vec![0usize; c];
    for i in g.nodes_with(Role::Train) {
        let mut row = centroids.row_mut(classes[i]);
        row += embedding.row(i);
        counts[classes[i]] += 1;
    }
    for (j, &count) in counts.iter().enumerate() {
        if count > 0 {
            let mut row = centroids.row_mut(j);
            row /= count as f64;
        }
    }
    test_accuracy(g, classes, |i| {
        let mut best = (0, f64::INFINITY);
        for j in (0..c).filter(|&j| counts[j] > 0) {
            let dist = (embedding.row(i) - centroids.row(j)).norm_squared();
            if dist < best.1 {
                best = (j, dist);
            }
        }
        best.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::{generate_sbm, FeatureMode, SbmSpec};

    #[test]
    fn majority_counts_training_labels() {
        let edges = [(0, 1), (1, 2), (2, 3)];
        let adj = Graph::adjacency_from_edges(4, &edges).unwrap();
        let labels = Labels::Single {
            classes: vec![1, 1, 0, 1],
            num_classes: 2,
        };
        let roles = vec![Role::Train, Role::Train, Role::Train, Role::Test];
        let g = Graph::new(adj, DMatrix::zeros(4, 1), labels, roles).unwrap();
        assert_eq!(majority_baseline_accuracy(&g).unwrap(), 1.0);
    }

    #[test]
    fn spectral_baseline_separates_clear_blocks() {
        let spec = SbmSpec::uniform(2, 60, 0.3, 0.01, 5, 11);
        let g = generate_sbm(&spec, 2, FeatureMode::RandomUniform).unwrap();
        assert!(spectral_baseline_accuracy(&g).unwrap() > 0.9);
    }
}
