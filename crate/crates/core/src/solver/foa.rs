use std::time::Instant;

use super::trace::{IterationRecord, IterationTrace, StopReason};
use super::{CompositeProblem, PointOf, SolverConfig, TangentOf};
use crate::error::{FoaError, Result};
use crate::manifold::Manifold;

/// `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`.
pub fn momentum_coeff(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// Initial `alpha` when none is configured.
pub fn default_alpha0<P: CompositeProblem + ?Sized>(problem: &P, x0: &PointOf<P>) -> f64 {
    if let Some(l) = problem.lipschitz() {
        if l > 0.0 && l.is_finite() {
            return l / 10.0;
        }
    }
    let g = problem.riemannian_gradient(x0);
    let norm = problem.manifold().norm(x0, &g);
    (1.0 / norm).clamp(1e-8, 1e8)
}

/// Quadratic model `Q_alpha(X, Y) = f(Y) + <grad f(Y), L_Y(X)> + alpha/2 |L_Y(X)|^2 + g(X)`.
pub fn quadratic_model<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &PointOf<P>,
    y: &PointOf<P>,
    grad_y: &TangentOf<P>,
    f_y: f64,
    alpha: f64,
) -> f64 {
    let m = problem.manifold();
    let lifted = m.lift(y, x);
    let lin = m.inner(y, grad_y, &lifted);
    let sq = m.inner(y, &lifted, &lifted);
    f_y + lin + 0.5 * alpha * sq + problem.nonsmooth_value(x)
}

/// `P_alpha(Y)`.
pub fn prox_map<P: CompositeProblem + ?Sized>(problem: &P, y: &PointOf<P>, alpha: f64) -> Result<PointOf<P>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(FoaError::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    let grad = problem.riemannian_gradient(y);
    problem.prox_step(y, &grad, alpha)
}

#[derive(Clone, Debug)]
pub struct Backtracked<X> {
    pub alpha: f64,
    pub x: X,
    /// `F(x)`.
    pub objective: f64,
    /// `Q_alpha(x, Y)` at acceptance.
    pub model: f64,
    /// Number of `eta` multiplications performed.
    pub increases: usize,
}

/// Relative slack in the sufficient-decrease test. Near a minimizer both
/// sides agree to rounding error, and a strict comparison would keep
/// multiplying `alpha` on noise.
pub const ACCEPT_SLACK: f64 = 64.0 * f64::EPSILON;

/// `F(x) <= Q` up to [`ACCEPT_SLACK`] relative to the magnitudes involved.
pub fn accepts(value: f64, model: f64, f_y: f64) -> bool {
    value.is_finite() && value <= model + ACCEPT_SLACK * (value.abs() + f_y.abs())
}

/// Smallest `i >= 0` with `F(P_a(Y)) <= Q_a(P_a(Y), Y)` for `a = eta^i alpha_prev`.
pub fn backtrack<P: CompositeProblem + ?Sized>(
    problem: &P,
    y: &PointOf<P>,
    alpha_prev: f64,
    eta: f64,
    max_doublings: usize,
) -> Result<Backtracked<PointOf<P>>> {
    let grad = problem.riemannian_gradient(y);
    let f_y = problem.smooth_value(y);
    backtrack_with(problem, y, &grad, f_y, alpha_prev, eta, max_doublings, 0)
}

#[allow(clippy::too_many_arguments)]
fn backtrack_with<P: CompositeProblem + ?Sized>(
    problem: &P,
    y: &PointOf<P>,
    grad: &TangentOf<P>,
    f_y: f64,
    alpha_prev: f64,
    eta: f64,
    max_doublings: usize,
    iteration: usize,
) -> Result<Backtracked<PointOf<P>>> {
    if !(alpha_prev > 0.0 && alpha_prev.is_finite()) {
        return Err(FoaError::InvalidParameter(format!(
            "alpha must be > 0, got {alpha_prev}"
        )));
    }
    let mut alpha = alpha_prev;
    let mut excess = f64::NAN;
    for i in 0..=max_doublings {
        let x = problem.prox_step(y, grad, alpha)?;
        let value = problem.objective(&x);
        let model = quadratic_model(problem, &x, y, grad, f_y, alpha);
        if accepts(value, model, f_y) {
            return Ok(Backtracked {
                alpha,
                x,
                objective: value,
                model,
                increases: i,
            });
        }
        excess = value - model;
        alpha *= eta;
    }
    Err(FoaError::Backtracking {
        iteration,
        doublings: max_doublings,
        alpha: alpha / eta,
        excess,
    })
}

#[derive(Clone, Debug)]
pub struct SolveOutcome<X> {
    pub x: X,
    pub trace: IterationTrace,
    pub stop: StopReason,
    pub iterations: usize,
    /// Final `alpha`.
    pub alpha: f64,
    pub objective: f64,
}

/// Accelerated proximal gradient on a manifold.
///
/// Per iteration: backtracked proximal step `X_k = P_{alpha_k}(Y_k)`, the
/// momentum update of `t`, and the extrapolation
/// `Y_{k+1} = R_{X_k}(-(t_k - 1)/t_{k+1} L_{X_k}(X_{k-1}))`. With
/// `config.momentum = false` this is the monotone proximal gradient method.
pub fn foa_solve<P: CompositeProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    x0: &PointOf<P>,
) -> Result<SolveOutcome<PointOf<P>>> {
    foa_solve_observed(problem, config, x0, |_, _| {})
}

/// [`foa_solve`] calling `observe(k, X_k)` for `X_0` and every accepted iterate.
pub fn foa_solve_observed<P, F>(
    problem: &P,
    config: &SolverConfig,
    x0: &PointOf<P>,
    mut observe: F,
) -> Result<SolveOutcome<PointOf<P>>>
where
    P: CompositeProblem + ?Sized,
    F: FnMut(usize, &PointOf<P>),
{
    config.validate()?;
    observe(0, x0);
    let m = problem.manifold();
    let started = Instant::now();
    let elapsed = || {
        if config.record_time {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    };

    let alpha0 = config.alpha0.unwrap_or_else(|| default_alpha0(problem, x0));
    let eps2 = config.eps2.unwrap_or(1e-12 / alpha0);

    let mut f_prev = problem.objective(x0);
    if !f_prev.is_finite() {
        return Err(FoaError::NonFiniteObjective { iteration: 0 });
    }
    let mut trace = IterationTrace::default();
    trace.push(IterationRecord {
        k: 0,
        objective: f_prev,
        alpha: alpha0,
        t: 1.0,
        step_norm: 0.0,
        rank: m.point_rank(x0),
        ms: elapsed(),
    });
    if config.target_objective.is_some_and(|t| f_prev <= t) {
        return Ok(SolveOutcome {
            x: x0.clone(),
            trace,
            stop: StopReason::TargetReached,
            iterations: 0,
            alpha: alpha0,
            objective: f_prev,
        });
    }

    let mut x_prev = x0.clone();
    let mut y = x0.clone();
    let mut t = 1.0;
    let mut alpha = alpha0;

    for k in 1..=config.max_iter {
        let grad = problem.riemannian_gradient(&y);
        let f_y = problem.smooth_value(&y);
        let start = if config.reset_alpha { alpha0 } else { alpha };
        let step = backtrack_with(problem, &y, &grad, f_y, start, config.eta, config.max_doublings, k)?;
        alpha = step.alpha;
        let x = step.x;
        let value = step.objective;
        if !value.is_finite() {
            return Err(FoaError::NonFiniteObjective { iteration: k });
        }
        observe(k, &x);

        let t_next = momentum_coeff(t);
        let back = m.lift(&x, &x_prev);
        let step_norm = m.norm(&x, &back);
        y = if config.momentum {
            m.retract(&x, &m.scale(&x, &back, -(t - 1.0) / t_next))
        } else {
            x.clone()
        };

        trace.push(IterationRecord {
            k,
            objective: value,
            alpha,
            t: t_next,
            step_norm,
            rank: m.point_rank(&x),
            ms: elapsed(),
        });

        let stop = if config.target_objective.is_some_and(|tgt| value <= tgt) {
            Some(StopReason::TargetReached)
        } else if config.eps1 > 0.0 && relative_decrease(f_prev, value) <= config.eps1 {
            Some(StopReason::RelativeDecrease)
        } else if eps2 > 0.0 && 1.0 / alpha <= eps2 {
            Some(StopReason::StepSize)
        } else if k == config.max_iter {
            Some(StopReason::MaxIterations)
        } else {
            None
        };

        x_prev = x;
        t = t_next;
        f_prev = value;

        if let Some(stop) = stop {
            return Ok(SolveOutcome {
                x: x_prev,
                trace,
                stop,
                iterations: k,
                alpha,
                objective: value,
            });
        }
    }
    unreachable!("max_iter >= 1 always terminates inside the loop")
}

/// `|F_prev - F| / |F_prev|`, or the absolute change when `F_prev = 0`.
pub(crate) fn relative_decrease(prev: f64, cur: f64) -> f64 {
    let diff = (prev - cur).abs();
    if prev == 0.0 {
        diff
    } else {
        diff / prev.abs()
    }
}
