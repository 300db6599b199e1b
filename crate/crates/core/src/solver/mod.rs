//! First-order solvers on manifolds: the accelerated proximal method
//! ([`foa_solve`]), its alternating two-block form ([`foa_noise_solve`]) and
//! Riemannian steepest-descent / conjugate-gradient baselines.

mod baseline;
mod foa;
mod trace;
mod two_block;

pub use baseline::{baseline_solve, BaselineMethod};
pub use foa::{
    accepts, backtrack, default_alpha0, foa_solve, foa_solve_observed, momentum_coeff, prox_map, quadratic_model,
    Backtracked, SolveOutcome, ACCEPT_SLACK,
};
pub use trace::{IterationRecord, IterationTrace, StopReason, TRACE_HEADER};
pub use two_block::{foa_noise_solve, NoiseOutcome, OuterRecord, TwoBlockProblem};

use serde::{Deserialize, Serialize};

use crate::error::{FoaError, Result};
use crate::linalg::DenseMatrix;
use crate::manifold::Manifold;

pub type PointOf<P> = <<P as CompositeProblem>::Space as Manifold>::Point;
pub type TangentOf<P> = <<P as CompositeProblem>::Space as Manifold>::Tangent;

/// `min_{X in M} F(X) = f(X) + g(X)` with smooth `f` and a nonsmooth `g`
/// whose proximal step on the manifold has a closed form.
pub trait CompositeProblem {
    type Space: Manifold;

    fn manifold(&self) -> &Self::Space;

    /// Smooth part `f`.
    fn smooth_value(&self, x: &PointOf<Self>) -> f64;

    /// Ambient (Euclidean) gradient of `f`.
    fn euclidean_gradient(&self, x: &PointOf<Self>) -> DenseMatrix;

    fn riemannian_gradient(&self, x: &PointOf<Self>) -> TangentOf<Self> {
        self.manifold().project_tangent(x, &self.euclidean_gradient(x))
    }

    /// Nonsmooth part `g`; zero for smooth problems.
    fn nonsmooth_value(&self, _x: &PointOf<Self>) -> f64 {
        0.0
    }

    fn has_nonsmooth(&self) -> bool {
        false
    }

    /// `P_alpha(Y) = argmin_X g(X) + alpha/2 |L_Y(X) + grad f(Y) / alpha|^2`.
    /// The default covers `g = 0`: a retracted gradient step of length `1/alpha`.
    fn prox_step(&self, y: &PointOf<Self>, grad: &TangentOf<Self>, alpha: f64) -> Result<PointOf<Self>> {
        let m = self.manifold();
        Ok(m.retract(y, &m.scale(y, grad, -1.0 / alpha)))
    }

    /// Known Lipschitz bound `L(f)` of the ambient gradient, if any.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn objective(&self, x: &PointOf<Self>) -> f64 {
        self.smooth_value(x) + self.nonsmooth_value(x)
    }
}

/// Scalar knobs of the solvers. A nonpositive tolerance disables its test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial `alpha` (inverse step). `None` picks `L(f)/10` when `L(f)` is
    /// known and `1/|grad f(X0)|` clamped to `[1e-8, 1e8]` otherwise.
    pub alpha0: Option<f64>,
    /// Backtracking growth factor, `> 1`.
    pub eta: f64,
    /// Relative objective decrease tolerance.
    pub eps1: f64,
    /// Stop once `1/alpha <= eps2`; `None` means `1e-12 / alpha0`.
    pub eps2: Option<f64>,
    /// Inner iteration cap `N1`.
    pub max_iter: usize,
    /// Outer alternation cap `N2`.
    pub max_outer: usize,
    /// Outer stop: `|X_k - X_{k+1}|_F <= outer_eps1` ...
    pub outer_eps1: f64,
    /// ... and `|E_k - E_{k+1}|_F <= outer_eps2`.
    pub outer_eps2: f64,
    pub momentum: bool,
    /// Cap on `alpha` increases within one backtracking search.
    pub max_doublings: usize,
    /// Restart each backtracking search from `alpha0` instead of the
    /// previous `alpha`. Off by default, which keeps `alpha` nondecreasing.
    pub reset_alpha: bool,
    /// Stop once `F(X_k) <= target_objective`.
    pub target_objective: Option<f64>,
    /// Record wall-clock milliseconds in traces (zero when off).
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha0: None,
            eta: 2.0,
            eps1: 1e-12,
            eps2: None,
            max_iter: 500,
            max_outer: 100,
            outer_eps1: 1e-6,
            outer_eps2: 1e-6,
            momentum: true,
            max_doublings: 60,
            reset_alpha: false,
            target_objective: None,
            record_time: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(FoaError::InvalidParameter(format!("eta must be > 1, got {}", self.eta)));
        }
        if let Some(a) = self.alpha0 {
            if !(a > 0.0 && a.is_finite()) {
                return Err(FoaError::InvalidParameter(format!("alpha0 must be > 0, got {a}")));
            }
        }
        if self.max_iter == 0 || self.max_outer == 0 {
            return Err(FoaError::InvalidParameter("iteration caps must be positive".into()));
        }
        Ok(())
    }
}
