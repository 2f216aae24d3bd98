use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SpicRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SpicRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform[0,1) matrix, drawn in row-major order.
pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Uniform[−bound, bound) matrix, drawn in row-major order.
pub fn symmetric_uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| bound * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    DMatrix::from_row_slice(rows, cols, &data)
}
