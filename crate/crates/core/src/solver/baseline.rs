use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::foa::{default_alpha0, relative_decrease, SolveOutcome};
use super::trace::{IterationRecord, IterationTrace, StopReason};
use super::{CompositeProblem, SolverConfig};
use crate::error::{FoaError, Result};
use crate::manifold::{LinearTangents, Manifold};

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    SteepestDescent,
    ConjugateGradient,
}

/// Riemannian steepest descent or Fletcher–Reeves conjugate gradient with
/// projection transport and Armijo backtracking, for smooth problems.
///
/// Every line search starts from the same trial step: `1/alpha0` when
/// configured, else `1/L(f)` when the Lipschitz bound is known, else
/// `1/|grad f(X0)|`. Trace rows store `alpha = 1/step`.
pub fn baseline_solve<P>(
    problem: &P,
    method: BaselineMethod,
    config: &SolverConfig,
    x0: &<P::Space as Manifold>::Point,
) -> Result<SolveOutcome<<P::Space as Manifold>::Point>>
where
    P: CompositeProblem + ?Sized,
    P::Space: LinearTangents,
{
    config.validate()?;
    if problem.has_nonsmooth() {
        return Err(FoaError::InvalidParameter(
            "steepest-descent and conjugate-gradient baselines need g = 0".into(),
        ));
    }
    let m = problem.manifold();
    let started = Instant::now();
    let elapsed = || {
        if config.record_time {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };

    let alpha0 = config.alpha0.unwrap_or_else(|| match problem.lipschitz() {
        Some(l) if l > 0.0 && l.is_finite() => l,
        _ => default_alpha0(problem, x0),
    });
    let mut step = 1.0 / alpha0;
    let mut x = x0.clone();
    let mut f = problem.smooth_value(&x);
    if !f.is_finite() {
        return Err(FoaError::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = IterationTrace::default();
    trace.push(IterationRecord {
        k: 0,
        objective: f,
        alpha: alpha0,
        t: 1.0,
        step_norm: 0.0,
        rank: m.point_rank(&x),
        ms: elapsed(),
    });
    if config.target_objective.is_some_and(|t| f <= t) {
        return Ok(SolveOutcome {
            x,
            trace,
            stop: StopReason::TargetReached,
            iterations: 0,
            alpha: alpha0,
            objective: f,
        });
    }

    let mut grad = problem.riemannian_gradient(&x);
    let mut grad_sq = m.inner(&x, &grad, &grad);
    let mut dir = m.scale(&x, &grad, -1.0);

    for k in 1..=config.max_iter {
        let mut slope = m.inner(&x, &grad, &dir);
        if slope >= 0.0 {
            dir = m.scale(&x, &grad, -1.0);
            slope = -grad_sq;
        }
        if slope == 0.0 {
            // exact stationary point
            return Ok(SolveOutcome {
                x,
                trace,
                stop: StopReason::RelativeDecrease,
                iterations: k - 1,
                alpha: 1.0 / step,
                objective: f,
            });
        }

        let mut trial = 1.0 / alpha0;
        let mut accepted = None;
        for _ in 0..=config.max_doublings {
            let cand = m.retract(&x, &m.scale(&x, &dir, trial));
            let fc = problem.smooth_value(&cand);
            if fc.is_finite() && fc <= f + ARMIJO_C * trial * slope {
                accepted = Some((cand, fc));
                break;
            }
            trial *= SHRINK;
        }
        let Some((x_new, f_new)) = accepted else {
            return Err(FoaError::LineSearch {
                iteration: k,
                step: trial,
            });
        };
        step = trial;

        let back = m.lift(&x_new, &x);
        let step_norm = m.norm(&x_new, &back);
        let grad_new = problem.riemannian_gradient(&x_new);
        let grad_new_sq = m.inner(&x_new, &grad_new, &grad_new);
        dir = match method {
            BaselineMethod::SteepestDescent => m.scale(&x_new, &grad_new, -1.0),
            BaselineMethod::ConjugateGradient => {
                let beta = if grad_sq > 0.0 { grad_new_sq / grad_sq } else { 0.0 };
                let moved = m.transport(&x, &x_new, &dir);
                m.axpy(&x_new, &m.scale(&x_new, &grad_new, -1.0), beta, &moved)
            }
        };

        trace.push(IterationRecord {
            k,
            objective: f_new,
            alpha: 1.0 / step,
            t: 1.0,
            step_norm,
            rank: m.point_rank(&x_new),
            ms: elapsed(),
        });

        let stop = if config.target_objective.is_some_and(|t| f_new <= t) {
            Some(StopReason::TargetReached)
        } else if config.eps1 > 0.0 && relative_decrease(f, f_new) <= config.eps1 {
            Some(StopReason::RelativeDecrease)
        } else if k == config.max_iter {
            Some(StopReason::MaxIterations)
        } else {
            None
        };

        x = x_new;
        f = f_new;
        grad = grad_new;
        grad_sq = grad_new_sq;

        if let Some(stop) = stop {
            return Ok(SolveOutcome {
                x,
                trace,
                stop,
                iterations: k,
                alpha: 1.0 / step,
                objective: f,
            });
        }
    }
    unreachable!("max_iter >= 1 always terminates inside the loop")
}
