//! Dense linear-algebra kernel: thin SVD, Eckart–Young truncation, thin QR
//! and the factored low-rank SVD used by the fast retraction paths.

use nalgebra::{DMatrix, DVector};

use crate::error::{FoaError, Result};

/// Real dense matrix. Entries are stored column-major by nalgebra; use
/// [`dense_from_row_major`] / [`to_row_major`] at I/O boundaries.
pub type DenseMatrix = DMatrix<f64>;

/// Relative factor of the numerical-rank cutoff `max(m, n) * sigma_1 * 1e-12`.
pub const RANK_CUTOFF_FACTOR: f64 = 1e-12;

pub fn dense_from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(FoaError::InvalidParameter(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    if data.len() != rows * cols {
        return Err(FoaError::InvalidParameter(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    let a = DMatrix::from_row_slice(rows, cols, data);
    ensure_finite(&a, "matrix entries")?;
    Ok(a)
}

pub fn to_row_major(a: &DenseMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn ensure_finite(a: &DenseMatrix, what: &'static str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(FoaError::NonFinite(what))
    }
}

pub fn check_shape(a: &DenseMatrix, expected: (usize, usize), context: &'static str) -> Result<()> {
    let got = a.shape();
    if got == expected {
        Ok(())
    } else {
        Err(FoaError::ShapeMismatch { context, expected, got })
    }
}

/// Frobenius inner product `trace(a^T b)`.
pub fn frob_inner(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Thin SVD `U diag(sigma) V^T` with `U: m x k`, `V: n x k`, sigma descending.
#[derive(Clone, Debug, PartialEq)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub sigma: DVector<f64>,
    pub v: DenseMatrix,
}

impl ThinSvd {
    /// The empty factorization of the zero `m x n` matrix.
    pub fn empty(m: usize, n: usize) -> Self {
        ThinSvd {
            u: DMatrix::zeros(m, 0),
            sigma: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        }
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// Number of stored triples (not the numerical rank).
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        if self.is_empty() {
            return DMatrix::zeros(self.nrows(), self.ncols());
        }
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// Keeps the leading `k` triples.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.len());
        ThinSvd {
            u: self.u.columns(0, k).into_owned(),
            sigma: self.sigma.rows(0, k).into_owned(),
            v: self.v.columns(0, k).into_owned(),
        }
    }

    /// Drops triples below the numerical-rank cutoff.
    pub fn without_negligible(&self) -> Self {
        let k = numerical_rank(self.sigma.as_slice(), self.nrows(), self.ncols());
        self.truncated(k)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.norm()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

/// Cutoff below which a singular value counts as zero.
pub fn rank_cutoff(m: usize, n: usize, sigma_max: f64) -> f64 {
    m.max(n) as f64 * sigma_max * RANK_CUTOFF_FACTOR
}

/// Number of singular values strictly above the cutoff. `sigma` must be
/// sorted descending.
pub fn numerical_rank(sigma: &[f64], m: usize, n: usize) -> usize {
    let Some(&first) = sigma.first() else {
        return 0;
    };
    if first <= 0.0 {
        return 0;
    }
    let cut = rank_cutoff(m, n, first);
    sigma.iter().take_while(|&&s| s > cut).count()
}

pub fn matrix_rank(a: &DenseMatrix) -> Result<usize> {
    let s = thin_svd(a)?;
    Ok(numerical_rank(s.sigma.as_slice(), a.nrows(), a.ncols()))
}

pub fn thin_svd(a: &DenseMatrix) -> Result<ThinSvd> {
    ensure_finite(a, "SVD input")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(ThinSvd::empty(m, n));
    }
    // nalgebra's implicit-shift SVD returns wrong factors for a fraction of
    // exactly rank-deficient inputs (which retractions produce constantly),
    // so the decomposition itself goes through faer.
    let mat = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = mat.thin_svd().map_err(|_| FoaError::SvdFailure { rows: m, cols: n })?;
    let k = m.min(n);
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let out = ThinSvd {
        u: DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
        sigma: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(n, k, |i, j| v[(i, j)]),
    };
    if out.sigma.iter().any(|s| !s.is_finite()) {
        return Err(FoaError::SvdFailure { rows: m, cols: n });
    }
    Ok(out)
}

/// Best rank-`r` approximation (Eckart–Young). Keeps `min(r, rank(a))`
/// triples, so `r = 0` and the zero matrix both give the empty factorization.
pub fn truncate_rank(a: &DenseMatrix, r: usize) -> Result<ThinSvd> {
    Ok(thin_svd(a)?.without_negligible().truncated(r))
}

/// Thin QR, `a = q r` with `q: m x min(m, k)` column-orthonormal.
pub fn thin_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, k) = a.shape();
    if m == 0 || k == 0 {
        return (DMatrix::zeros(m, 0), DMatrix::zeros(0, k));
    }
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Orthonormal basis of the column space of `a` (thin Q factor).
pub fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    thin_qr(a).0
}

/// SVD of the product `left * right^T` without forming it: two thin QR
/// factorizations and an SVD of the small core `R_l R_r^T`. All triples are
/// returned (including negligible ones); callers truncate.
pub fn low_rank_svd(left: &DenseMatrix, right: &DenseMatrix) -> Result<ThinSvd> {
    debug_assert_eq!(left.ncols(), right.ncols());
    let (m, n) = (left.nrows(), right.nrows());
    if left.ncols() == 0 {
        return Ok(ThinSvd::empty(m, n));
    }
    let (ql, rl) = thin_qr(left);
    let (qr, rr) = thin_qr(right);
    let core = rl * rr.transpose();
    let small = thin_svd(&core)?;
    Ok(ThinSvd {
        u: ql * small.u,
        sigma: small.sigma,
        v: qr * small.v,
    })
}

/// Stacks matrices with equal row counts side by side.
pub fn hcat(blocks: &[&DenseMatrix]) -> DenseMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// `a * diag(d)`.
pub fn scale_columns(a: &DenseMatrix, d: &[f64]) -> DenseMatrix {
    let mut out = a.clone();
    for (j, s) in d.iter().enumerate() {
        out.column_mut(j).scale_mut(*s);
    }
    out
}
