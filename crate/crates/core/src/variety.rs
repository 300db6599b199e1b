//! Geometry of the low-rank variety `M_{<=r} = {X : rank(X) <= r}`.
//!
//! At a point of rank `s < r` the tangent set is the cone
//! `T_X M_s (+) {Xi : rank(Xi) <= r - s, Xi in U^perp (x) V^perp}`.
//! A [`ConeTangent`] keeps the smooth part in the factored format of
//! [`FactoredTangent`] and the rank-increasing part as a thin SVD.

use crate::error::{FoaError, Result};
use crate::fixed_rank::{
    difference_factors, project_dense, project_factored, retract_factored, FactoredPoint, FactoredTangent,
};
use crate::linalg::{frob_inner, hcat, low_rank_svd, scale_columns, truncate_rank, DenseMatrix, ThinSvd};
use crate::manifold::Manifold;

#[derive(Clone, Debug, PartialEq)]
pub struct ConeTangent {
    pub smooth: FactoredTangent,
    pub xi: ThinSvd,
}

impl ConeTangent {
    pub fn zero(base: &FactoredPoint) -> Self {
        ConeTangent {
            smooth: FactoredTangent::zero(base),
            xi: ThinSvd::empty(base.nrows(), base.ncols()),
        }
    }

    pub fn to_dense(&self, base: &FactoredPoint) -> DenseMatrix {
        self.smooth.to_dense(base) + self.xi.to_dense()
    }

    /// Factors `(A, B)` with `A B^T` equal to the represented matrix.
    pub fn factors(&self, base: &FactoredPoint) -> (DenseMatrix, DenseMatrix) {
        let (a, b) = self.smooth.factors(base);
        if self.xi.is_empty() {
            return (a, b);
        }
        let vs = scale_columns(&self.xi.v, self.xi.sigma.as_slice());
        (hcat(&[&a, &self.xi.u]), hcat(&[&b, &vs]))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut xi = self.xi.clone();
        xi.sigma *= c.abs();
        if c < 0.0 {
            xi.u.neg_mut();
        }
        if c == 0.0 {
            xi = ThinSvd::empty(xi.nrows(), xi.ncols());
        }
        ConeTangent {
            smooth: self.smooth.scaled(c),
            xi,
        }
    }

    /// Frobenius inner product. Smooth and rank-increasing parts at the same
    /// base are orthogonal, so the cross terms vanish.
    pub fn inner(&self, other: &Self) -> f64 {
        self.smooth.inner(&other.smooth) + svd_inner(&self.xi, &other.xi)
    }

    /// Largest violation of the cone constraints `Xi^T U = 0`, `Xi V = 0`
    /// together with the smooth-part gauge.
    pub fn membership_violation(&self, base: &FactoredPoint) -> f64 {
        let mut worst = self.smooth.gauge_violation(base);
        if !self.xi.is_empty() && base.rank() > 0 {
            worst = worst
                .max((self.xi.u.transpose() * &base.u).amax())
                .max((self.xi.v.transpose() * &base.v).amax());
        }
        worst
    }
}

/// `trace(A^T B)` for two thin SVDs.
fn svd_inner(a: &ThinSvd, b: &ThinSvd) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let left = scale_columns(&(a.u.transpose() * &b.u), b.sigma.as_slice());
    let mut left_scaled = left;
    for (i, s) in a.sigma.iter().enumerate() {
        left_scaled.row_mut(i).scale_mut(*s);
    }
    frob_inner(&left_scaled, &(a.v.transpose() * &b.v))
}

/// Best rank-`budget` approximation of `(I - U U^T) A B^T (I - V V^T)`.
fn complement_truncation(x: &FactoredPoint, a: &DenseMatrix, b: &DenseMatrix, budget: usize) -> Result<ThinSvd> {
    let (m, n) = x.shape();
    if budget == 0 || a.ncols() == 0 {
        return Ok(ThinSvd::empty(m, n));
    }
    let a_perp = a - &x.u * (x.u.transpose() * a);
    let b_perp = b - &x.v * (x.v.transpose() * b);
    Ok(low_rank_svd(&a_perp, &b_perp)?.without_negligible().truncated(budget))
}

/// Tangent-cone projection of a dense `eta` at `x` for rank budget `r`.
pub fn project_cone(x: &FactoredPoint, eta: &DenseMatrix, r: usize) -> Result<ConeTangent> {
    let smooth = project_dense(x, eta);
    let s = x.rank();
    let (m, n) = x.shape();
    let xi = if s >= r {
        ThinSvd::empty(m, n)
    } else {
        let ut_eta = x.u.transpose() * eta;
        let eta_v = eta * &x.v;
        let resid = eta - &x.u * &ut_eta - &eta_v * x.v.transpose() + &x.u * (&ut_eta * &x.v) * x.v.transpose();
        truncate_rank(&resid, r - s)?
    };
    Ok(ConeTangent { smooth, xi })
}

/// Tangent-cone projection of `A B^T`, never forming the product.
pub fn project_cone_factored(x: &FactoredPoint, a: &DenseMatrix, b: &DenseMatrix, r: usize) -> Result<ConeTangent> {
    let smooth = project_factored(x, a, b);
    let budget = r.saturating_sub(x.rank());
    let xi = complement_truncation(x, a, b, budget)?;
    Ok(ConeTangent { smooth, xi })
}

/// Riemannian gradient on the variety: cone projection of the ambient gradient.
pub fn grad_variety(x: &FactoredPoint, euclid_grad: &DenseMatrix, r: usize) -> Result<ConeTangent> {
    project_cone(x, euclid_grad, r)
}

/// Rank-`<= r` truncation of `X + xi`.
pub fn retract_variety(x: &FactoredPoint, xi: &ConeTangent, r: usize) -> Result<FactoredPoint> {
    retract_factored(x, &xi.smooth, Some(&xi.xi), r)
}

/// `project_cone(X, Y - X, r)`; zero when `Y == X`.
pub fn lift_variety(x: &FactoredPoint, y: &FactoredPoint, r: usize) -> Result<ConeTangent> {
    if x == y {
        return Ok(ConeTangent::zero(x));
    }
    let (a, b) = difference_factors(x, y);
    project_cone_factored(x, &a, &b, r)
}

/// `M_{<=r}` in `R^{m x n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LowRankVariety {
    pub m: usize,
    pub n: usize,
    pub r: usize,
}

impl LowRankVariety {
    pub fn new(m: usize, n: usize, r: usize) -> Result<Self> {
        if m == 0 || n == 0 || r == 0 {
            return Err(FoaError::InvalidParameter(format!(
                "variety needs positive m, n, r, got m={m} n={n} r={r}"
            )));
        }
        Ok(LowRankVariety {
            m,
            n,
            r: r.min(m.min(n)),
        })
    }

    pub fn with_rank(&self, r: usize) -> Self {
        LowRankVariety {
            r: r.min(self.m.min(self.n)),
            ..*self
        }
    }
}

/// The trait methods panic only if a small core SVD fails to converge; the
/// free functions above return that as an error.
impl Manifold for LowRankVariety {
    type Point = FactoredPoint;
    type Tangent = ConeTangent;

    fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    fn project_tangent(&self, x: &FactoredPoint, z: &DenseMatrix) -> ConeTangent {
        project_cone(x, z, self.r).expect("cone projection SVD failed")
    }

    fn retract(&self, x: &FactoredPoint, xi: &ConeTangent) -> FactoredPoint {
        retract_variety(x, xi, self.r).expect("variety retraction SVD failed")
    }

    fn lift(&self, x: &FactoredPoint, y: &FactoredPoint) -> ConeTangent {
        lift_variety(x, y, self.r).expect("variety lift SVD failed")
    }

    fn transport(&self, x: &FactoredPoint, y: &FactoredPoint, xi: &ConeTangent) -> ConeTangent {
        if x == y {
            return xi.clone();
        }
        let (a, b) = xi.factors(x);
        project_cone_factored(y, &a, &b, self.r).expect("cone projection SVD failed")
    }

    fn inner(&self, _x: &FactoredPoint, a: &ConeTangent, b: &ConeTangent) -> f64 {
        a.inner(b)
    }

    fn scale(&self, _x: &FactoredPoint, a: &ConeTangent, c: f64) -> ConeTangent {
        a.scaled(c)
    }

    fn zero_tangent(&self, x: &FactoredPoint) -> ConeTangent {
        ConeTangent::zero(x)
    }

    fn point_to_dense(&self, x: &FactoredPoint) -> DenseMatrix {
        x.to_dense()
    }

    fn tangent_to_dense(&self, x: &FactoredPoint, a: &ConeTangent) -> DenseMatrix {
        a.to_dense(x)
    }

    fn point_rank(&self, x: &FactoredPoint) -> usize {
        x.rank()
    }
}
