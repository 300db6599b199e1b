//! Accelerated first-order optimization on Riemannian manifolds.
//!
//! The solver ([`solver::foa_solve`]) is generic over a [`Manifold`] and a
//! [`CompositeProblem`] `f + g`. Concrete geometries are the fixed-rank
//! manifold ([`FixedRank`]), the variety of bounded-rank matrices
//! ([`LowRankVariety`]) and flat [`Euclidean`] space. On top of these sit a
//! matrix-completion problem, a low-rank representation solver
//! ([`lrr::sp_rprg_alm`]) and the benchmark harness used by the CLI.

pub mod cluster;
pub mod error;
pub mod fixed_rank;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod lrr;
pub mod manifold;
pub mod problems;
pub mod prox;
pub mod solver;
pub mod variety;

pub use error::{FoaError, Result};
pub use fixed_rank::{FactoredPoint, FactoredTangent, FixedRank};
pub use linalg::{DenseMatrix, ThinSvd};
pub use manifold::{Euclidean, LinearTangents, Manifold};
pub use solver::{foa_solve, CompositeProblem, SolverConfig};
pub use variety::{ConeTangent, LowRankVariety};
