//! Dense reference computations: matrix powers and full eigendecompositions.
//!
//! Everything here goes through dense `nalgebra` matrices and never touches
//! the sparse product, so it can serve as an independent check on it.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::aggregators::Aggregator;
use crate::error::{Result, SpicError};

pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Eigenpairs of `βI + M`, sorted by |λ| descending (ties: larger λ first).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
    /// Coordinates of the supplied start vector in the eigenbasis.
    pub coefficients: Option<Vec<f64>>,
}

impl SpectralDecomposition {
    pub fn dominant(&self) -> DVector<f64> {
        self.eigenvectors.column(0).into_owned()
    }

    /// |λ_2| / |λ_1|; zero for 1×1 operators.
    pub fn spectral_gap_ratio(&self) -> f64 {
        match self.eigenvalues.as_slice() {
            [l1, l2, ..] if *l1 != 0.0 => l2.abs() / l1.abs(),
            _ => 0.0,
        }
    }

    /// `X Λ X⁻¹` (or `X Λ Xᵀ` for orthonormal X) rebuilt from the pairs.
    pub fn reconstruct(&self) -> Option<DMatrix<f64>> {
        let x = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        x.clone().try_inverse().map(|inv| x * lambda * inv)
    }
}

/// `(βI + M)^k X` by dense matrix powers.
pub fn dense_power_apply(agg: &Aggregator, x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let s = agg.to_dense();
    let mut power = DMatrix::identity(s.nrows(), s.ncols());
    for _ in 0..k {
        power = &power * &s;
    }
    power * x
}

pub fn spectral_oracle(agg: &Aggregator, v0: Option<&[f64]>) -> Result<SpectralDecomposition> {
    spectral_oracle_with_cap(agg, v0, DEFAULT_ORACLE_CAP)
}

fn residual_ok(a: &DMatrix<f64>, lambda: f64, v: &DVector<f64>) -> bool {
    (a * v - v * lambda).norm() <= 1e-8 * lambda.abs().max(1.0)
}

/// Flips `v` so its entry sum is positive (first significant entry when the
/// sum vanishes).
fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let s = v.sum();
    let flip = if s.abs() > 1e-10 {
        s < 0.0
    } else {
        v.iter().find(|x| x.abs() > 1e-10).is_some_and(|&x| x < 0.0)
    };
    if flip {
        v.neg_mut();
    }
    v
}

fn sort_pairs(mut pairs: Vec<(f64, DVector<f64>)>) -> (Vec<f64>, DMatrix<f64>) {
    pairs.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(b.0.total_cmp(&a.0)));
    let n = pairs.len();
    let mut vecs = DMatrix::zeros(n, n);
    for (j, (_, v)) in pairs.iter().enumerate() {
        vecs.set_column(j, v);
    }
    (pairs.into_iter().map(|p| p.0).collect(), vecs)
}

fn symmetric_pairs(a: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new(a.clone());
    (0..a.nrows())
        .map(|j| (eig.eigenvalues[j], fix_sign(eig.eigenvectors.column(j).normalize())))
        .collect()
}

/// Eigenpairs of a general real matrix with real spectrum: eigenvalues
/// from the real Schur form, eigenvectors as null spaces of `A − λI`.
fn general_pairs(a: &DMatrix<f64>) -> Result<Vec<(f64, DVector<f64>)>> {
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), 1e-15, 10_000)
        .ok_or_else(|| SpicError::Oracle("Schur iteration did not converge".into()))?;
    let complex = schur.complex_eigenvalues();
    let mut values = Vec::with_capacity(n);
    for z in complex.iter() {
        if z.im.abs() > 1e-8 * z.re.abs().max(1.0) {
            return Err(SpicError::Oracle(format!(
                "complex eigenvalue {}{:+}i; use a symmetric aggregator family",
                z.re, z.im
            )));
        }
        values.push(z.re);
    }
    values.sort_by(|a, b| b.total_cmp(a));

    let mut pairs = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (values[j - 1] - values[j]).abs() <= 1e-7 * values[j].abs().max(1.0) {
            j += 1;
        }
        let mult = j - i;
        let center = values[i..j].iter().sum::<f64>() / mult as f64;
        let shifted = a - DMatrix::identity(n, n) * center;
        let svd = SVD::try_new(shifted, false, true, 1e-15, 10_000)
            .ok_or_else(|| SpicError::Oracle("SVD did not converge".into()))?;
        let v_t = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| svd.singular_values[p].total_cmp(&svd.singular_values[q]));
        for &idx in order.iter().take(mult) {
            let v = v_t.row(idx).transpose().normalize();
            let lambda = v.dot(&(a * &v));
            if !residual_ok(a, lambda, &v) {
                return Err(SpicError::Oracle(format!(
                    "eigenvector for λ ≈ {center} misses the residual tolerance; \
                     the matrix may not be diagonalizable, use a symmetric aggregator family"
                )));
            }
            pairs.push((lambda, fix_sign(v)));
        }
        i = j;
    }
    Ok(pairs)
}

/// Full dense eigendecomposition of the aggregator operator `βI + M`.
///
/// Symmetric aggregators use a symmetric eigensolver and have orthonormal
/// eigenvectors; others must have a real, diagonalizable spectrum.
pub fn spectral_oracle_with_cap(agg: &Aggregator, v0: Option<&[f64]>, cap: usize) -> Result<SpectralDecomposition> {
    let n = agg.size();
    if n > cap {
        return Err(SpicError::Oracle(format!(
            "{n} nodes exceed the dense oracle cap of {cap}"
        )));
    }
    if let Some(v) = v0 {
        if v.len() != n {
            return Err(SpicError::Dimension(format!(
                "start vector has length {}, operator has {n} rows",
                v.len()
            )));
        }
    }
    let a = agg.to_dense();
    let pairs = if agg.is_symmetric() {
        symmetric_pairs(&a)
    } else {
        general_pairs(&a)?
    };
    let (eigenvalues, eigenvectors) = sort_pairs(pairs);
    for (j, &l) in eigenvalues.iter().enumerate() {
        if !residual_ok(&a, l, &eigenvectors.column(j).into_owned()) {
            return Err(SpicError::Oracle(format!("eigenpair {j} fails the residual check")));
        }
    }

    let coefficients = match v0 {
        None => None,
        Some(v) => {
            let v = DVector::from_column_slice(v);
            let c = if agg.is_symmetric() {
                eigenvectors.transpose() * &v
            } else {
                eigenvectors
                    .clone()
                    .lu()
                    .solve(&v)
                    .ok_or_else(|| SpicError::Oracle("eigenvectors do not form a basis".into()))?
            };
            if (&eigenvectors * &c - &v).norm() > 1e-8 * v.norm().max(1.0) {
                return Err(SpicError::Oracle(
                    "start vector is not reproduced by the eigenbasis".into(),
                ));
            }
            Some(c.iter().copied().collect())
        }
    };

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        coefficients,
    })
}

/// Cosine similarity between `(βI + M)^k v0` and the dominant eigenvector,
/// for `k = 0..=k_max`, plus the decomposition it was measured against.
pub fn convergence_report(agg: &Aggregator, v0: &[f64], k_max: usize) -> Result<(Vec<f64>, SpectralDecomposition)> {
    let spec = spectral_oracle(agg, Some(v0))?;
    let c1 = spec.coefficients.as_ref().expect("start vector supplied")[0];
    if c1.abs() <= 1e-12 {
        return Err(SpicError::InvalidInput("v0 orthogonal to dominant eigenvector".into()));
    }
    let x1 = spec.dominant();
    let mut v = DMatrix::from_column_slice(v0.len(), 1, v0);
    let mut sims = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            v = agg.apply(&v);
            let norm = v.norm();
            if norm == 0.0 || !norm.is_finite() {
                return Err(SpicError::NonFinite { iteration: k });
            }
            v /= norm;
        }
        let col = v.column(0);
        sims.push(col.dot(&x1).abs() / (col.norm() * x1.norm()));
    }
    Ok((sims, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregators::{build_da, build_dad, Family};
    use crate::graphdata::fixtures::simple;
    use crate::sparse::CsrMatrix;

    #[test]
    fn identity_oracle() {
        let v0 = [0.3, -1.0, 2.0, 0.5];
        let s = spectral_oracle(&Aggregator::identity(4), Some(&v0)).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        let c = DVector::from_vec(s.coefficients.clone().unwrap());
        let back = &s.eigenvectors * c;
        for (a, b) in back.iter().zip(v0) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_dad_spectrum() {
        let g = simple(3, &[(0, 1), (1, 2), (0, 2)], 1, 1);
        let s = spectral_oracle(&build_dad(&g), None).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(s.eigenvalues[1].abs() < 1e-12 && s.eigenvalues[2].abs() < 1e-12);
    }

    #[test]
    fn da_dominant_is_uniform() {
        let g = simple(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)], 1, 1);
        let s = spectral_oracle(&build_da(&g), None).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-10);
        let x1 = s.dominant();
        let u = 1.0 / 6f64.sqrt();
        assert!(x1.iter().all(|v| (v - u).abs() < 1e-10));
        // shares eigenvalues with the symmetric normalization
        let sym = spectral_oracle(&build_dad(&g), None).unwrap();
        for (a, b) in s.eigenvalues.iter().zip(&sym.eigenvalues) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn complex_spectrum_is_rejected() {
        // rotation-like asymmetric matrix
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        let agg = Aggregator::new(m, Family::RlAsym, false);
        let err = spectral_oracle(&agg.unwrap(), None).unwrap_err();
        assert!(err.to_string().contains("symmetric aggregator"));
    }

    #[test]
    fn cap_is_enforced() {
        let err = spectral_oracle_with_cap(&Aggregator::identity(5), None, 4).unwrap_err();
        assert!(err.to_string().contains("cap"));
    }

    #[test]
    fn orthogonal_start_vector() {
        let g = simple(2, &[(0, 1)], 1, 1);
        // dominant eigenvector of the 2-node DAD is (1,1)/√2
        let err = convergence_report(&build_dad(&g), &[1.0, -1.0], 5).unwrap_err();
        assert!(err.to_string().contains("orthogonal to dominant"));
    }

    #[test]
    fn dominant_start_stays_put() {
        let g = simple(5, &[(0, 1), (1, 2), (2, 3), (3, 4)], 1, 1);
        let agg = build_dad(&g);
        let s = spectral_oracle(&agg, None).unwrap();
        let x1: Vec<f64> = s.dominant().iter().copied().collect();
        let (sims, _) = convergence_report(&agg, &x1, 10).unwrap();
        assert!(sims.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }
}
