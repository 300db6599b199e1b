//! Geometry of the fixed-rank manifold `M_r = {X : rank(X) = r}`.
//!
//! Points are stored as thin-SVD factors `U diag(sigma) V^T`. A tangent at
//! `X` is stored as `(M, Up, Vp)` and represents
//!
//! ```text
//! U M V^T + U Vp^T + Up V^T,    Up^T U = 0,  Vp^T V = 0
//! ```
//!
//! so every operation costs `O((m + n) r^2)` and never forms an `m x n`
//! matrix unless the caller passes one in.

use nalgebra::{DMatrix, DVector};

use crate::error::{FoaError, Result};
use crate::linalg::{check_shape, frob_inner, hcat, low_rank_svd, scale_columns, truncate_rank, DenseMatrix, ThinSvd};
use crate::manifold::{LinearTangents, Manifold};

/// Tolerance for the orthonormality checks on factored points.
const ORTHO_TOL: f64 = 1e-8;

/// A point `U diag(sigma) V^T` with orthonormal `U`, `V` and positive,
/// descending `sigma`. The stored rank may be below the manifold rank after
/// a rank-deficient retraction.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredPoint {
    pub u: DenseMatrix,
    pub sigma: DVector<f64>,
    pub v: DenseMatrix,
}

impl FactoredPoint {
    pub fn new(u: DenseMatrix, sigma: DVector<f64>, v: DenseMatrix) -> Result<Self> {
        let k = sigma.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(FoaError::InvalidParameter(format!(
                "factor widths {} / {} do not match {} singular values",
                u.ncols(),
                v.ncols(),
                k
            )));
        }
        if sigma.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(FoaError::InvalidParameter(
                "singular values must be positive and finite".into(),
            ));
        }
        if sigma.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(FoaError::InvalidParameter(
                "singular values must be sorted descending".into(),
            ));
        }
        for (f, name) in [(&u, "U"), (&v, "V")] {
            if f.iter().any(|x| !x.is_finite()) {
                return Err(FoaError::NonFinite("point factor"));
            }
            let gram = f.transpose() * f;
            if (gram - DMatrix::identity(k, k)).amax() > ORTHO_TOL {
                return Err(FoaError::InvalidParameter(format!(
                    "factor {name} is not column-orthonormal"
                )));
            }
        }
        Ok(FactoredPoint { u, sigma, v })
    }

    /// Builds a point from SVD factors, dropping numerically zero triples.
    pub fn from_svd(svd: ThinSvd) -> Self {
        let s = svd.without_negligible();
        FactoredPoint {
            u: s.u,
            sigma: s.sigma,
            v: s.v,
        }
    }

    /// Best rank-`r` approximation of a dense matrix.
    pub fn from_dense(a: &DenseMatrix, r: usize) -> Result<Self> {
        Ok(Self::from_svd(truncate_rank(a, r)?))
    }

    pub fn zero(m: usize, n: usize) -> Self {
        Self::from_svd(ThinSvd::empty(m, n))
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.as_svd().to_dense()
    }

    pub fn as_svd(&self) -> ThinSvd {
        ThinSvd {
            u: self.u.clone(),
            sigma: self.sigma.clone(),
            v: self.v.clone(),
        }
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.norm()
    }

    /// `U diag(sigma)`.
    pub(crate) fn us(&self) -> DenseMatrix {
        scale_columns(&self.u, self.sigma.as_slice())
    }

    /// Entry `(i, j)` of the represented matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (0..self.rank())
            .map(|k| self.u[(i, k)] * self.sigma[k] * self.v[(j, k)])
            .sum()
    }
}

/// Tangent `U M V^T + U Vp^T + Up V^T` at a [`FactoredPoint`].
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredTangent {
    pub m: DenseMatrix,
    pub up: DenseMatrix,
    pub vp: DenseMatrix,
}

impl FactoredTangent {
    pub fn zero(base: &FactoredPoint) -> Self {
        let k = base.rank();
        FactoredTangent {
            m: DMatrix::zeros(k, k),
            up: DMatrix::zeros(base.nrows(), k),
            vp: DMatrix::zeros(base.ncols(), k),
        }
    }

    pub fn to_dense(&self, base: &FactoredPoint) -> DenseMatrix {
        if base.rank() == 0 {
            return DMatrix::zeros(base.nrows(), base.ncols());
        }
        let (a, b) = self.factors(base);
        a * b.transpose()
    }

    /// Factors `(A, B)` with `A B^T` equal to the represented matrix:
    /// `A = [U, Up]`, `B = [V M^T + Vp, V]`.
    pub fn factors(&self, base: &FactoredPoint) -> (DenseMatrix, DenseMatrix) {
        let a = hcat(&[&base.u, &self.up]);
        let first = &base.v * self.m.transpose() + &self.vp;
        let b = hcat(&[&first, &base.v]);
        (a, b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        FactoredTangent {
            m: &self.m * c,
            up: &self.up * c,
            vp: &self.vp * c,
        }
    }

    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        FactoredTangent {
            m: &self.m + &other.m * c,
            up: &self.up + &other.up * c,
            vp: &self.vp + &other.vp * c,
        }
    }

    /// Frobenius inner product; the three pieces are mutually orthogonal.
    pub fn inner(&self, other: &Self) -> f64 {
        frob_inner(&self.m, &other.m) + frob_inner(&self.up, &other.up) + frob_inner(&self.vp, &other.vp)
    }

    /// Largest violation of `Up^T U = 0`, `Vp^T V = 0`.
    pub fn gauge_violation(&self, base: &FactoredPoint) -> f64 {
        if base.rank() == 0 {
            return 0.0;
        }
        let a = (self.up.transpose() * &base.u).amax();
        let b = (self.vp.transpose() * &base.v).amax();
        a.max(b)
    }
}

/// Projection of a dense `z` onto `T_X M_s`, `s = rank(X)`:
/// `P_U Z P_V + P_U^perp Z P_V + P_U Z P_V^perp`.
pub(crate) fn project_dense(x: &FactoredPoint, z: &DenseMatrix) -> FactoredTangent {
    let zv = z * &x.v;
    let ztu = z.transpose() * &x.u;
    tangent_from_products(x, zv, ztu)
}

/// Projection of `Z = A B^T` onto `T_X M_s` without forming `Z`.
pub(crate) fn project_factored(x: &FactoredPoint, a: &DenseMatrix, b: &DenseMatrix) -> FactoredTangent {
    let zv = a * (b.transpose() * &x.v);
    let ztu = b * (a.transpose() * &x.u);
    tangent_from_products(x, zv, ztu)
}

/// Tangent projection from the products `Z V` and `Z^T U`; lets callers with
/// sparse `Z` skip the dense product.
pub(crate) fn tangent_from_products(x: &FactoredPoint, zv: DenseMatrix, ztu: DenseMatrix) -> FactoredTangent {
    let m = x.u.transpose() * &zv;
    let up = zv - &x.u * &m;
    let vp = ztu - &x.v * m.transpose();
    FactoredTangent { m, up, vp }
}

/// Factors `(A, B)` of `X + xi (+ extra)`, where `extra` is a low-rank
/// term given by its SVD (the cone part on varieties).
pub(crate) fn step_factors(
    x: &FactoredPoint,
    xi: &FactoredTangent,
    extra: Option<&ThinSvd>,
) -> (DenseMatrix, DenseMatrix) {
    let sigma_plus_m = DMatrix::from_diagonal(&x.sigma) + &xi.m;
    let first = &x.v * sigma_plus_m.transpose() + &xi.vp;
    match extra {
        Some(e) if !e.is_empty() => {
            let es = scale_columns(&e.v, e.sigma.as_slice());
            (hcat(&[&x.u, &xi.up, &e.u]), hcat(&[&first, &x.v, &es]))
        }
        _ => (hcat(&[&x.u, &xi.up]), hcat(&[&first, &x.v])),
    }
}

/// Truncated SVD of `X + xi (+ extra)` at rank `r` via two thin QRs and a
/// small core SVD.
pub(crate) fn retract_factored(
    x: &FactoredPoint,
    xi: &FactoredTangent,
    extra: Option<&ThinSvd>,
    r: usize,
) -> Result<FactoredPoint> {
    let (m, n) = x.shape();
    let (a, b) = step_factors(x, xi, extra);
    if a.ncols() == 0 {
        return Ok(FactoredPoint::zero(m, n));
    }
    let svd = low_rank_svd(&a, &b)?;
    Ok(FactoredPoint::from_svd(svd.without_negligible().truncated(r)))
}

/// `Y - X` as factors `(A, B)`.
pub(crate) fn difference_factors(x: &FactoredPoint, y: &FactoredPoint) -> (DenseMatrix, DenseMatrix) {
    let neg: Vec<f64> = x.sigma.iter().map(|s| -s).collect();
    let a = hcat(&[&y.us(), &scale_columns(&x.u, &neg)]);
    let b = hcat(&[&y.v, &x.v]);
    (a, b)
}

/// Result of a retraction that may lose rank.
#[derive(Clone, Debug)]
pub struct Retracted {
    pub point: FactoredPoint,
    /// Numerical rank of `X + xi` fell below the manifold rank.
    pub rank_deficient: bool,
}

/// The manifold of `m x n` matrices of rank `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedRank {
    pub m: usize,
    pub n: usize,
    pub r: usize,
}

impl FixedRank {
    pub fn new(m: usize, n: usize, r: usize) -> Result<Self> {
        if m == 0 || n == 0 || r == 0 || r > m.min(n) {
            return Err(FoaError::InvalidParameter(format!(
                "fixed-rank manifold needs 1 <= r <= min(m, n), got m={m} n={n} r={r}"
            )));
        }
        Ok(FixedRank { m, n, r })
    }

    /// `(m + n - r) r`.
    pub fn dimension(&self) -> usize {
        (self.m + self.n - self.r) * self.r
    }

    fn check_point(&self, x: &FactoredPoint, context: &'static str) -> Result<()> {
        if x.shape() != (self.m, self.n) {
            return Err(FoaError::ShapeMismatch {
                context,
                expected: (self.m, self.n),
                got: x.shape(),
            });
        }
        Ok(())
    }

    /// Shape-checked tangent projection.
    pub fn try_project(&self, x: &FactoredPoint, z: &DenseMatrix) -> Result<FactoredTangent> {
        self.check_point(x, "project_tangent")?;
        check_shape(z, (self.m, self.n), "project_tangent")?;
        Ok(project_dense(x, z))
    }

    /// Shape-checked transport.
    pub fn try_transport(&self, x: &FactoredPoint, y: &FactoredPoint, xi: &FactoredTangent) -> Result<FactoredTangent> {
        self.check_point(x, "transport")?;
        self.check_point(y, "transport")?;
        if xi.up.shape() != (self.m, x.rank()) || xi.vp.shape() != (self.n, x.rank()) {
            return Err(FoaError::ShapeMismatch {
                context: "transport tangent",
                expected: (self.m, x.rank()),
                got: xi.up.shape(),
            });
        }
        Ok(self.transport(x, y, xi))
    }

    /// Riemannian gradient: the tangent projection of the ambient gradient.
    pub fn riemannian_grad(&self, x: &FactoredPoint, euclid_grad: &DenseMatrix) -> FactoredTangent {
        project_dense(x, euclid_grad)
    }

    /// Retraction that reports when `X + xi` has numerical rank below `r`.
    pub fn retract_flagged(&self, x: &FactoredPoint, xi: &FactoredTangent) -> Result<Retracted> {
        let point = retract_factored(x, xi, None, self.r)?;
        let rank_deficient = point.rank() < self.r;
        Ok(Retracted { point, rank_deficient })
    }

    /// Dense reference retraction: `truncate_rank(X + xi, r)` via a full SVD.
    pub fn retract_dense(&self, x: &FactoredPoint, xi: &FactoredTangent) -> Result<FactoredPoint> {
        FactoredPoint::from_dense(&(x.to_dense() + xi.to_dense(x)), self.r)
    }
}

impl Manifold for FixedRank {
    type Point = FactoredPoint;
    type Tangent = FactoredTangent;

    fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn project_tangent(&self, x: &FactoredPoint, z: &DenseMatrix) -> FactoredTangent {
        project_dense(x, z)
    }

    /// # Panics
    /// If the small core SVD fails to converge; use [`FixedRank::retract_flagged`]
    /// to get the error instead.
    fn retract(&self, x: &FactoredPoint, xi: &FactoredTangent) -> FactoredPoint {
        retract_factored(x, xi, None, self.r).expect("retraction SVD failed")
    }

    fn lift(&self, x: &FactoredPoint, y: &FactoredPoint) -> FactoredTangent {
        if x == y {
            return FactoredTangent::zero(x);
        }
        let (a, b) = difference_factors(x, y);
        project_factored(x, &a, &b)
    }

    fn transport(&self, x: &FactoredPoint, y: &FactoredPoint, xi: &FactoredTangent) -> FactoredTangent {
        if x == y {
            return xi.clone();
        }
        let (a, b) = xi.factors(x);
        project_factored(y, &a, &b)
    }

    fn inner(&self, _x: &FactoredPoint, a: &FactoredTangent, b: &FactoredTangent) -> f64 {
        a.inner(b)
    }

    fn scale(&self, _x: &FactoredPoint, a: &FactoredTangent, c: f64) -> FactoredTangent {
        a.scaled(c)
    }

    fn zero_tangent(&self, x: &FactoredPoint) -> FactoredTangent {
        FactoredTangent::zero(x)
    }

    fn point_to_dense(&self, x: &FactoredPoint) -> DenseMatrix {
        x.to_dense()
    }

    fn tangent_to_dense(&self, x: &FactoredPoint, a: &FactoredTangent) -> DenseMatrix {
        a.to_dense(x)
    }

    fn point_rank(&self, x: &FactoredPoint) -> usize {
        x.rank()
    }
}

impl LinearTangents for FixedRank {
    fn axpy(&self, _x: &FactoredPoint, a: &FactoredTangent, c: f64, b: &FactoredTangent) -> FactoredTangent {
        a.axpy(c, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::thin_svd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
    }

    fn random_point(m: usize, n: usize, r: usize, rng: &mut ChaCha8Rng) -> FactoredPoint {
        let a = randn(m, r, rng) * randn(r, n, rng);
        FactoredPoint::from_dense(&a, r).unwrap()
    }

    fn e1() -> FactoredPoint {
        FactoredPoint::new(
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            DVector::from_vec(vec![1.0]),
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap()
    }

    #[test]
    fn projection_of_e1e1t() {
        let (a, b, c, d) = (1.5, -2.0, 0.25, 7.0);
        let z = DMatrix::from_row_slice(2, 2, &[a, b, c, d]);
        let t = project_dense(&e1(), &z);
        let expected = DMatrix::from_row_slice(2, 2, &[a, b, c, 0.0]);
        assert!((t.to_dense(&e1()) - expected).amax() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_point(10, 8, 3, &mut rng);
        let z = randn(10, 8, &mut rng);
        let p = project_dense(&x, &z);
        let pd = p.to_dense(&x);
        let pp = project_dense(&x, &pd).to_dense(&x);
        assert!((&pp - &pd).amax() < 1e-12);
        assert!(frob_inner(&(&z - &pd), &pd).abs() < 1e-9 * z.norm());
        assert!(p.gauge_violation(&x) < 1e-12);
        // factored inner product equals the dense one
        let q = project_dense(&x, &randn(10, 8, &mut rng));
        assert!((p.inner(&q) - frob_inner(&pd, &q.to_dense(&x))).abs() < 1e-10);
    }

    #[test]
    fn retract_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_point(7, 5, 2, &mut rng);
        let mf = FixedRank::new(7, 5, 2).unwrap();
        let y = mf.retract(&x, &FactoredTangent::zero(&x));
        assert!((y.to_dense() - x.to_dense()).amax() < 1e-12);
    }

    #[test]
    fn retract_diagonal_truncation() {
        let x = FactoredPoint::from_dense(&DMatrix::from_row_slice(2, 2, &[1., 0., 0., 0.]), 1).unwrap();
        let step = DMatrix::from_row_slice(2, 2, &[0., 0., 0., 0.5]);
        // diag(0, 0.5) is normal to T_X; feed it through the dense path.
        let mf = FixedRank::new(2, 2, 1).unwrap();
        let y = FactoredPoint::from_dense(&(x.to_dense() + step), mf.r).unwrap();
        assert!((y.to_dense() - x.to_dense()).amax() < 1e-14);
    }

    #[test]
    fn factored_retraction_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mf = FixedRank::new(12, 9, 3).unwrap();
        for _ in 0..10 {
            let x = random_point(12, 9, 3, &mut rng);
            let xi = project_dense(&x, &randn(12, 9, &mut rng)).scaled(0.3);
            let fast = mf.retract(&x, &xi).to_dense();
            let dense = mf.retract_dense(&x, &xi).unwrap().to_dense();
            assert!((fast - dense).amax() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_retraction_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mf = FixedRank::new(6, 5, 2).unwrap();
        let x = random_point(6, 5, 2, &mut rng);
        // xi = -X lies in the tangent space (M = -Sigma) and cancels X exactly.
        let xi = FactoredTangent {
            m: -DMatrix::from_diagonal(&x.sigma),
            up: DMatrix::zeros(6, 2),
            vp: DMatrix::zeros(5, 2),
        };
        let out = mf.retract_flagged(&x, &xi).unwrap();
        assert!(out.rank_deficient);
        assert_eq!(out.point.rank(), 0);
    }

    #[test]
    fn lift_self_is_zero_and_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mf = FixedRank::new(9, 7, 2).unwrap();
        let x = random_point(9, 7, 2, &mut rng);
        let y = random_point(9, 7, 2, &mut rng);
        assert_eq!(mf.lift(&x, &x), FactoredTangent::zero(&x));
        let fast = mf.lift(&x, &y).to_dense(&x);
        let dense = project_dense(&x, &(y.to_dense() - x.to_dense())).to_dense(&x);
        assert!((fast - dense).amax() < 1e-10);
    }

    #[test]
    fn transport_matches_dense_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mf = FixedRank::new(9, 7, 2).unwrap();
        let x = random_point(9, 7, 2, &mut rng);
        let y = random_point(9, 7, 2, &mut rng);
        let xi = project_dense(&x, &randn(9, 7, &mut rng));
        let fast = mf.transport(&x, &y, &xi).to_dense(&y);
        let dense = project_dense(&y, &xi.to_dense(&x)).to_dense(&y);
        assert!((fast - dense).amax() < 1e-10);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mf = FixedRank::new(9, 7, 2).unwrap();
        let x = random_point(9, 7, 2, &mut rng);
        let y = random_point(8, 7, 2, &mut rng);
        assert!(mf.try_project(&x, &DMatrix::zeros(7, 9)).is_err());
        assert!(mf.try_transport(&x, &y, &FactoredTangent::zero(&x)).is_err());
        assert!(FixedRank::new(3, 3, 4).is_err());
    }

    #[test]
    fn point_validation() {
        let s = thin_svd(&DMatrix::from_row_slice(2, 2, &[2., 0., 0., 1.])).unwrap();
        assert!(FactoredPoint::new(s.u.clone(), s.sigma.clone(), s.v.clone()).is_ok());
        let unsorted = DVector::from_vec(vec![1.0, 2.0]);
        assert!(FactoredPoint::new(s.u.clone(), unsorted, s.v.clone()).is_err());
        let bad_u = &s.u * 2.0;
        assert!(FactoredPoint::new(bad_u, s.sigma.clone(), s.v.clone()).is_err());
    }
}
