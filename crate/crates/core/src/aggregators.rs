//! Message-passing aggregators `M`, stored as immutable sparse operators.
//!
//! Every family works on the self-looped pattern `Ã = A + I`: static
//! families normalize it, attention and random families reweight its
//! entries. The shift `β` is kept alongside the matrix and applied as
//! `βI + M` when the operator is used.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Result, SpicError};
use crate::graphdata::Graph;
use crate::rng::{seeded, symmetric_uniform_matrix};
use crate::sparse::CsrMatrix;

/// Tolerance for the symmetric claim of an aggregator.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `D̃^{-1/2} Ã D̃^{-1/2}`
    Dad,
    /// `D̃^{-1} Ã`
    Da,
    /// cosine-softmax attention over raw features
    Agnn,
    /// GAT-style attention, symmetrized `(Z + Zᵀ)/2`
    GatSym,
    /// GAT-style attention `Z`
    GatAsym,
    /// `(H + Hᵀ)/2 + I`, `H = A ∘ W`
    RlSym,
    /// `A ∘ W + I`
    RlAsym,
    Identity,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Dad => "dad",
            Family::Da => "da",
            Family::Agnn => "agnn",
            Family::GatSym => "gat_sym",
            Family::GatAsym => "gat_asym",
            Family::RlSym => "rl_sym",
            Family::RlAsym => "rl_am",
            Family::Identity => "identity",
        }
    }

    /// Families whose rows are probability distributions.
    pub fn is_row_stochastic(self) -> bool {
        matches!(self, Family::Da | Family::Agnn | Family::GatAsym)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "dad" => Family::Dad,
            "da" => Family::Da,
            "agnn" => Family::Agnn,
            "gat_sym" => Family::GatSym,
            "gat_asym" => Family::GatAsym,
            "rl_sym" => Family::RlSym,
            "rl_am" | "rl_asym" => Family::RlAsym,
            "identity" => Family::Identity,
            other => return Err(format!("unknown aggregator family {other:?}")),
        })
    }
}

#[derive(Debug)]
pub struct Aggregator {
    matrix: CsrMatrix,
    shift: u32,
    family: Family,
    symmetric: bool,
    transpose: OnceLock<CsrMatrix>,
}

impl Clone for Aggregator {
    fn clone(&self) -> Self {
        Self {
            matrix: self.matrix.clone(),
            shift: self.shift,
            family: self.family,
            symmetric: self.symmetric,
            transpose: OnceLock::new(),
        }
    }
}

impl Aggregator {
    /// Wraps a square matrix, checking the symmetry claim (within
    /// [`SYMMETRY_TOL`]) and row-stochasticity for the families that promise it.
    pub fn new(matrix: CsrMatrix, family: Family, symmetric: bool) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SpicError::Dimension("aggregator matrix must be square".into()));
        }
        if symmetric && matrix.max_asymmetry() > SYMMETRY_TOL {
            return Err(SpicError::InvalidInput(format!(
                "{family} matrix claimed symmetric but differs from its transpose by {:e}",
                matrix.max_asymmetry()
            )));
        }
        if family.is_row_stochastic() {
            if let Some((r, s)) = matrix
                .row_sums()
                .into_iter()
                .enumerate()
                .find(|(_, s)| (s - 1.0).abs() > 1e-9)
            {
                return Err(SpicError::InvalidInput(format!(
                    "{family} row {r} sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self {
            matrix,
            shift: 0,
            family,
            symmetric,
            transpose: OnceLock::new(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(CsrMatrix::identity(n), Family::Identity, true).expect("identity is valid")
    }

    pub fn with_shift(mut self, beta: u32) -> Self {
        self.shift = beta;
        self
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    fn transposed(&self) -> &CsrMatrix {
        self.transpose.get_or_init(|| self.matrix.transpose())
    }

    /// `(βI + M) X`
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.matrix.shifted_mul_dense(self.shift as f64, x)
    }

    /// `(βI + M)ᵀ X`
    pub fn apply_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.symmetric {
            return self.apply(x);
        }
        self.transposed().shifted_mul_dense(self.shift as f64, x)
    }

    /// `M X` without the shift.
    pub fn apply_unshifted(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.matrix.mul_dense(x)
    }

    /// `Mᵀ X` without the shift.
    pub fn apply_unshifted_transpose(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        if self.symmetric {
            return self.matrix.mul_dense(x);
        }
        self.transposed().mul_dense(x)
    }

    /// Dense `βI + M`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.matrix.to_dense();
        for i in 0..m.nrows() {
            m[(i, i)] += self.shift as f64;
        }
        m
    }
}

/// Row-wise neighbourhoods `N(i) ∪ {i}` as a CSR pattern with unit values.
pub fn self_looped_pattern(g: &Graph) -> CsrMatrix {
    let adj = g.adjacency();
    let n = g.num_nodes();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(adj.nnz() + n);
    indptr.push(0);
    for r in 0..n {
        let cols = adj.row(r).0;
        let at = cols.partition_point(|&c| c < r);
        indices.extend_from_slice(&cols[..at]);
        indices.push(r);
        indices.extend_from_slice(&cols[at..]);
        indptr.push(indices.len());
    }
    let nnz = indices.len();
    CsrMatrix::new(n, n, indptr, indices, vec![1.0; nnz]).expect("pattern is well formed")
}

/// Symmetric normalized adjacency with self-loops.
pub fn build_dad(g: &Graph) -> Aggregator {
    let pattern = self_looped_pattern(g);
    let inv_sqrt: Vec<f64> = (0..g.num_nodes())
        .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
        .collect();
    let mut values = Vec::with_capacity(pattern.nnz());
    for r in 0..pattern.nrows() {
        for &c in pattern.row(r).0 {
            values.push(inv_sqrt[r] * inv_sqrt[c]);
        }
    }
    Aggregator::new(pattern.with_values(values), Family::Dad, true).expect("DAD is symmetric")
}

/// Random-walk normalized adjacency with self-loops.
pub fn build_da(g: &Graph) -> Aggregator {
    let pattern = self_looped_pattern(g);
    let mut values = Vec::with_capacity(pattern.nnz());
    for r in 0..pattern.nrows() {
        let width = pattern.row(r).0.len();
        values.extend(std::iter::repeat_n(1.0 / width as f64, width));
    }
    Aggregator::new(pattern.with_values(values), Family::Da, false).expect("DA rows sum to one")
}

/// Softmax of `scores` in place, with max subtraction.
fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

/// Row-softmax of per-entry scores over the self-looped pattern.
fn softmax_rows(pattern: &CsrMatrix, mut score: impl FnMut(usize, usize) -> f64) -> CsrMatrix {
    let mut values = Vec::with_capacity(pattern.nnz());
    for r in 0..pattern.nrows() {
        let start = values.len();
        values.extend(pattern.row(r).0.iter().map(|&c| score(r, c)));
        softmax_in_place(&mut values[start..]);
    }
    pattern.with_values(values)
}

/// Cosine-similarity attention `softmax_j(ε · cos(x_i, x_j))` over `N(i) ∪ {i}`.
pub fn build_agnn(g: &Graph, eps: f64) -> Result<Aggregator> {
    if !eps.is_finite() {
        return Err(SpicError::InvalidInput(format!("epsilon must be finite, got {eps}")));
    }
    let x = g.features();
    let norms: Vec<f64> = x.row_iter().map(|r| r.norm()).collect();
    if let Some(node) = norms.iter().position(|&v| v == 0.0) {
        return Err(SpicError::InvalidInput(format!(
            "node {node} has a zero feature vector; cosine similarity is undefined"
        )));
    }
    let pattern = self_looped_pattern(g);
    let matrix = softmax_rows(&pattern, |r, c| {
        let cos = x.row(r).dot(&x.row(c)) / (norms[r] * norms[c]);
        eps * cos
    });
    Aggregator::new(matrix, Family::Agnn, false)
}

/// Parameters of the GAT-style scoring `LeakyReLU(aᵀ[P x_i ‖ P x_j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// d × h projection applied to raw features before scoring.
    pub proj: DMatrix<f64>,
    /// Length 2h; first half scores the target node, second half the neighbour.
    pub attn_vector: DVector<f64>,
    pub leaky_slope: f64,
}

impl AttentionParams {
    pub const DEFAULT_HIDDEN: usize = 8;
    pub const DEFAULT_SLOPE: f64 = 0.2;

    pub fn new(proj: DMatrix<f64>, attn_vector: DVector<f64>, leaky_slope: f64) -> Result<Self> {
        let h = proj.ncols();
        if h == 0 {
            return Err(SpicError::InvalidInput("attention width must be at least 1".into()));
        }
        if attn_vector.len() != 2 * h {
            return Err(SpicError::Dimension(format!(
                "attention vector has length {}, expected 2h = {}",
                attn_vector.len(),
                2 * h
            )));
        }
        if !(leaky_slope > 0.0 && leaky_slope < 1.0) {
            return Err(SpicError::InvalidInput(format!(
                "LeakyReLU slope must lie in (0,1), got {leaky_slope}"
            )));
        }
        Ok(Self {
            proj,
            attn_vector,
            leaky_slope,
        })
    }

    /// Random parameters: `a ~ U[−1/√(2h), 1/√(2h)]`, `P ~ U[−1/√d, 1/√d]`.
    pub fn random(d: usize, h: usize, seed: u64) -> Result<Self> {
        if d == 0 || h == 0 {
            return Err(SpicError::InvalidInput(
                "attention needs positive feature and hidden widths".into(),
            ));
        }
        let mut rng = seeded(seed);
        let a_bound = 1.0 / ((2 * h) as f64).sqrt();
        let attn: Vec<f64> = (0..2 * h)
            .map(|_| a_bound * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let proj = symmetric_uniform_matrix(&mut rng, d, h, 1.0 / (d as f64).sqrt());
        Self::new(proj, DVector::from_vec(attn), Self::DEFAULT_SLOPE)
    }

    pub fn hidden(&self) -> usize {
        self.proj.ncols()
    }
}

/// GAT-style attention matrix `Z`, or `(Z + Zᵀ)/2` when `symmetric`.
pub fn build_gat(g: &Graph, params: &AttentionParams, symmetric: bool) -> Result<Aggregator> {
    if params.proj.nrows() != g.num_features() {
        return Err(SpicError::Dimension(format!(
            "attention projection expects {} features, graph has {}",
            params.proj.nrows(),
            g.num_features()
        )));
    }
    let h = params.hidden();
    let hidden = g.features() * &params.proj;
    let a_self = params.attn_vector.rows(0, h);
    let a_nbr = params.attn_vector.rows(h, h);
    let left: Vec<f64> = hidden.row_iter().map(|r| r.transpose().dot(&a_self)).collect();
    let right: Vec<f64> = hidden.row_iter().map(|r| r.transpose().dot(&a_nbr)).collect();
    let slope = params.leaky_slope;
    let pattern = self_looped_pattern(g);
    let z = softmax_rows(&pattern, |r, c| {
        let e = left[r] + right[c];
        if e >= 0.0 {
            e
        } else {
            slope * e
        }
    });
    if symmetric {
        Aggregator::new(symmetrize(&z), Family::GatSym, true)
    } else {
        Aggregator::new(z, Family::GatAsym, false)
    }
}

/// `(M + Mᵀ)/2` for a matrix whose pattern is already symmetric.
fn symmetrize(m: &CsrMatrix) -> CsrMatrix {
    let t = m.transpose();
    debug_assert!(m.same_pattern(&t));
    let values = m.values().iter().zip(t.values()).map(|(a, b)| 0.5 * (a + b)).collect();
    m.with_values(values)
}

/// Random reweighting `H = A ∘ W`, `W ~ U[0,1)` per stored entry, plus `I`;
/// symmetrized as `(H + Hᵀ)/2 + I` when `symmetric`.
pub fn build_random_laplacian(g: &Graph, symmetric: bool, seed: u64) -> Aggregator {
    let mut rng = seeded(seed);
    let adj = g.adjacency();
    let weights: Vec<f64> = adj.values().iter().map(|&a| a * rng.random::<f64>()).collect();
    let mut h = adj.with_values(weights);
    if symmetric {
        h = symmetrize(&h);
    }
    // add the identity on the self-looped pattern
    let pattern = self_looped_pattern(g);
    let mut values = Vec::with_capacity(pattern.nnz());
    for r in 0..pattern.nrows() {
        let (cols, vals) = h.row(r);
        let mut it = cols.iter().zip(vals).peekable();
        for &c in pattern.row(r).0 {
            if c == r {
                values.push(1.0);
            } else {
                let (_, &v) = it.next().expect("pattern covers adjacency");
                values.push(v);
            }
        }
    }
    let family = if symmetric { Family::RlSym } else { Family::RlAsym };
    Aggregator::new(pattern.with_values(values), family, symmetric).expect("random Laplacian construction is valid")
}

/// Natural-log entropy `−Σ_j w_ij ln w_ij` of every row of the matrix
/// (shift excluded); zero weights contribute nothing.
pub fn attention_entropy(agg: &Aggregator) -> Result<Vec<f64>> {
    let m = agg.matrix();
    (0..m.nrows())
        .map(|r| {
            let (cols, vals) = m.row(r);
            let mut h = 0.0;
            for (&c, &w) in cols.iter().zip(vals) {
                if w < 0.0 {
                    return Err(SpicError::InvalidInput(format!(
                        "negative weight {w} at ({r}, {c}); entropy is undefined"
                    )));
                }
                if w > 0.0 {
                    h -= w * w.ln();
                }
            }
            Ok(h)
        })
        .collect()
}

/// Equal-width histogram; `edges` has `counts.len() + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins span `[min, max]`; the last bin is closed on the right.
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(SpicError::InvalidInput("histogram needs at least one bin".into()));
        }
        if values.is_empty() {
            return Err(SpicError::InvalidInput("histogram of no values".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|b| lo + width * b as f64).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Ok(Self { edges, counts })
    }
}
