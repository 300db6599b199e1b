//! The manifold contract consumed by the solvers, and the flat Euclidean
//! instance on which the accelerated method reduces to FISTA.

use nalgebra::DMatrix;

use crate::linalg::{frob_inner, DenseMatrix};

/// Operations the first-order solvers need from a (possibly singular)
/// embedded matrix manifold. The metric is the ambient Frobenius inner
/// product restricted to tangents.
pub trait Manifold {
    type Point: Clone + std::fmt::Debug;
    type Tangent: Clone + std::fmt::Debug;

    /// Ambient shape `(m, n)`.
    fn shape(&self) -> (usize, usize);

    /// Orthogonal projection of an ambient matrix onto the tangent set at `x`.
    fn project_tangent(&self, x: &Self::Point, z: &DenseMatrix) -> Self::Tangent;

    /// Maps `x + xi` back onto the manifold.
    fn retract(&self, x: &Self::Point, xi: &Self::Tangent) -> Self::Point;

    /// Tangent at `x` pointing toward `y`: `P_{T_x}(y - x)`. Zero when `y == x`.
    fn lift(&self, x: &Self::Point, y: &Self::Point) -> Self::Tangent;

    /// Projection transport of `xi` (tangent at `x`) to the tangent set at `y`.
    fn transport(&self, x: &Self::Point, y: &Self::Point, xi: &Self::Tangent) -> Self::Tangent;

    fn inner(&self, x: &Self::Point, a: &Self::Tangent, b: &Self::Tangent) -> f64;

    fn norm(&self, x: &Self::Point, a: &Self::Tangent) -> f64 {
        self.inner(x, a, a).max(0.0).sqrt()
    }

    fn scale(&self, x: &Self::Point, a: &Self::Tangent, c: f64) -> Self::Tangent;

    fn zero_tangent(&self, x: &Self::Point) -> Self::Tangent;

    fn point_to_dense(&self, x: &Self::Point) -> DenseMatrix;

    fn tangent_to_dense(&self, x: &Self::Point, a: &Self::Tangent) -> DenseMatrix;

    /// Rank of the point (the ambient dimension count for flat spaces).
    fn point_rank(&self, x: &Self::Point) -> usize;
}

/// Manifolds whose tangent sets are linear spaces, so tangents can be added.
/// The tangent cone of a low-rank variety is not one of them.
pub trait LinearTangents: Manifold {
    /// `a + c * b`, both based at `x`.
    fn axpy(&self, x: &Self::Point, a: &Self::Tangent, c: f64, b: &Self::Tangent) -> Self::Tangent;
}

/// `R^{m x n}` with the identity geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Euclidean {
    pub rows: usize,
    pub cols: usize,
}

impl Euclidean {
    pub fn new(rows: usize, cols: usize) -> Self {
        Euclidean { rows, cols }
    }

    /// Column-vector space `R^n`.
    pub fn vector(n: usize) -> Self {
        Euclidean { rows: n, cols: 1 }
    }
}

impl Manifold for Euclidean {
    type Point = DenseMatrix;
    type Tangent = DenseMatrix;

    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn project_tangent(&self, _x: &DenseMatrix, z: &DenseMatrix) -> DenseMatrix {
        z.clone()
    }

    fn retract(&self, x: &DenseMatrix, xi: &DenseMatrix) -> DenseMatrix {
        x + xi
    }

    fn lift(&self, x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
        y - x
    }

    fn transport(&self, _x: &DenseMatrix, _y: &DenseMatrix, xi: &DenseMatrix) -> DenseMatrix {
        xi.clone()
    }

    fn inner(&self, _x: &DenseMatrix, a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        frob_inner(a, b)
    }

    fn scale(&self, _x: &DenseMatrix, a: &DenseMatrix, c: f64) -> DenseMatrix {
        a * c
    }

    fn zero_tangent(&self, _x: &DenseMatrix) -> DenseMatrix {
        DMatrix::zeros(self.rows, self.cols)
    }

    fn point_to_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        x.clone()
    }

    fn tangent_to_dense(&self, _x: &DenseMatrix, a: &DenseMatrix) -> DenseMatrix {
        a.clone()
    }

    fn point_rank(&self, _x: &DenseMatrix) -> usize {
        self.rows * self.cols
    }
}

impl LinearTangents for Euclidean {
    fn axpy(&self, _x: &DenseMatrix, a: &DenseMatrix, c: f64, b: &DenseMatrix) -> DenseMatrix {
        a + b * c
    }
}
