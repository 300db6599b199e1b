use serde::{Deserialize, Serialize};

use super::foa::foa_solve;
use super::trace::{IterationRecord, IterationTrace, StopReason};
use super::{CompositeProblem, SolverConfig};
use crate::error::Result;
use crate::linalg::DenseMatrix;
use crate::manifold::Manifold;

type Pt<T> = <<T as TwoBlockProblem>::Space as Manifold>::Point;

/// `min_{X in M, E} F(X, E)` where the `E` block has a closed-form minimizer.
pub trait TwoBlockProblem {
    type Space: Manifold;
    /// The `X` subproblem with `E` frozen.
    type XProblem<'a>: CompositeProblem<Space = Self::Space>
    where
        Self: 'a;

    fn manifold(&self) -> &Self::Space;

    fn x_problem<'a>(&'a self, e: &'a DenseMatrix) -> Self::XProblem<'a>;

    /// `argmin_E F(X, E)`.
    fn minimize_e(&self, x: &Pt<Self>) -> Result<DenseMatrix>;

    fn objective(&self, x: &Pt<Self>, e: &DenseMatrix) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub outer_k: usize,
    pub objective: f64,
    pub x_change: f64,
    pub e_change: f64,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct NoiseOutcome<X> {
    pub x: X,
    pub e: DenseMatrix,
    /// Inner iterations of every outer step, renumbered consecutively.
    pub trace: IterationTrace,
    pub outer: Vec<OuterRecord>,
    pub stop: StopReason,
}

/// Alternating minimization: a full accelerated inner solve over `X` with
/// `E` fixed, then the closed-form `E` update. `alpha` carries over between
/// inner solves. An inner result that raises `F(., E)` above the warm start
/// is discarded, so the outer objective never increases.
pub fn foa_noise_solve<T: TwoBlockProblem>(
    problem: &T,
    config: &SolverConfig,
    x0: &Pt<T>,
    e0: &DenseMatrix,
) -> Result<NoiseOutcome<Pt<T>>> {
    config.validate()?;
    let m = problem.manifold();
    let mut x = x0.clone();
    let mut e = e0.clone();
    let mut trace = IterationTrace::default();
    let mut outer = Vec::new();
    let mut inner_cfg = config.clone();
    let mut k_offset = 0;

    for outer_k in 1..=config.max_outer {
        let (x_new, inner_iterations) = {
            let sub = problem.x_problem(&e);
            let inner =
                foa_solve(&sub, &inner_cfg, &x).map_err(|err| err.context(format!("outer iteration {outer_k}")))?;
            inner_cfg.alpha0 = Some(inner.alpha);
            for r in inner.trace.records.iter() {
                if r.k == 0 && outer_k > 1 {
                    continue;
                }
                trace.push(IterationRecord {
                    k: r.k + k_offset,
                    ..*r
                });
            }
            k_offset += inner.iterations;
            let keep_old = sub.objective(&inner.x) > sub.objective(&x);
            (if keep_old { x.clone() } else { inner.x }, inner.iterations)
        };
        let e_new = problem.minimize_e(&x_new)?;

        let x_change = (m.point_to_dense(&x) - m.point_to_dense(&x_new)).norm();
        let e_change = (&e - &e_new).norm();
        x = x_new;
        e = e_new;
        let objective = problem.objective(&x, &e);
        outer.push(OuterRecord {
            outer_k,
            objective,
            x_change,
            e_change,
            inner_iterations,
        });

        if x_change <= config.outer_eps1 && e_change <= config.outer_eps2 {
            return Ok(NoiseOutcome {
                x,
                e,
                trace,
                outer,
                stop: StopReason::Stationary,
            });
        }
    }
    Ok(NoiseOutcome {
        x,
        e,
        trace,
        outer,
        stop: StopReason::MaxIterations,
    })
}
