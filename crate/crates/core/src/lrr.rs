//! Low-rank representation by an augmented Lagrangian method on the
//! variety `M_{<=r}`, with a rank schedule `r = l, 2l, ...` warm-started
//! from the previous rank's solution.
//!
//! ```text
//! min |X|_* + lambda |E|_{2,1}   s.t.  D X + E = D,  X in M_{<=r}
//! F(X, E, U) = |X|_* + lambda |E|_{2,1} + <U, D - DX - E> + rho/2 |D - DX - E|_F^2
//! ```

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FoaError, Result};
use crate::fixed_rank::FactoredPoint;
use crate::linalg::{frob_inner, matrix_rank, DenseMatrix};
use crate::prox::{l21_norm, shrink_columns, svt, ShrinkThreshold};
use crate::solver::{foa_solve, CompositeProblem, IterationRecord, SolverConfig, StopReason, TRACE_HEADER};
use crate::variety::{project_cone_factored, retract_variety, ConeTangent, LowRankVariety};

pub const RHO_CAP: f64 = 1e5;

#[derive(Clone, Debug, PartialEq)]
pub struct LrrProblem {
    /// Data, one sample per column.
    pub d: DenseMatrix,
    pub lambda: f64,
    pub rho0: f64,
    /// Penalty growth factor, `> 1`.
    pub beta: f64,
    /// Rank increment `l`.
    pub inc: usize,
    pub rho_cap: f64,
}

impl LrrProblem {
    pub fn new(d: DenseMatrix, lambda: f64, rho0: f64, beta: f64, inc: usize) -> Result<Self> {
        if d.iter().any(|x| !x.is_finite()) {
            return Err(FoaError::NonFinite("LRR data"));
        }
        for (name, v) in [("lambda", lambda), ("rho", rho0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FoaError::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(FoaError::InvalidParameter(format!("beta must be > 1, got {beta}")));
        }
        if inc == 0 {
            return Err(FoaError::InvalidParameter("rank increment must be >= 1".into()));
        }
        Ok(LrrProblem {
            d,
            lambda,
            rho0,
            beta,
            inc,
            rho_cap: RHO_CAP,
        })
    }

    /// Number of samples `n`; `X` is `n x n`.
    pub fn samples(&self) -> usize {
        self.d.ncols()
    }

    /// `D - D X - E`.
    pub fn residual(&self, x: &FactoredPoint, e: &DenseMatrix) -> DenseMatrix {
        &self.d - self.apply(x) - e
    }

    /// `D X` computed through the factors.
    fn apply(&self, x: &FactoredPoint) -> DenseMatrix {
        if x.rank() == 0 {
            return DMatrix::zeros(self.d.nrows(), self.d.ncols());
        }
        (&self.d * x.us()) * x.v.transpose()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlmState {
    pub x: FactoredPoint,
    pub e: DenseMatrix,
    /// Lagrange multiplier.
    pub u: DenseMatrix,
    pub rho: f64,
    /// Current rank budget.
    pub r: usize,
}

impl AlmState {
    /// All-zero start with the first rank budget.
    pub fn initial(problem: &LrrProblem) -> Self {
        let n = problem.samples();
        AlmState {
            x: FactoredPoint::zero(n, n),
            e: DMatrix::zeros(problem.d.nrows(), n),
            u: DMatrix::zeros(problem.d.nrows(), n),
            rho: problem.rho0,
            r: problem.inc.min(n),
        }
    }
}

fn smooth_part(u: &DenseMatrix, rho: f64, resid: &DenseMatrix) -> f64 {
    frob_inner(u, resid) + 0.5 * rho * resid.norm_squared()
}

/// Augmented Lagrangian value at `state`.
pub fn alm_objective(state: &AlmState, problem: &LrrProblem) -> f64 {
    let resid = problem.residual(&state.x, &state.e);
    state.x.nuclear_norm() + problem.lambda * l21_norm(&state.e) + smooth_part(&state.u, state.rho, &resid)
}

/// `|X|_* + lambda |E|_{2,1}`.
pub fn lrr_objective(x: &FactoredPoint, e: &DenseMatrix, lambda: f64) -> f64 {
    x.nuclear_norm() + lambda * l21_norm(e)
}

/// Ambient gradient in `X` of `<U, D - DX - E> + rho/2 |D - DX - E|^2`:
/// `-D^T U - rho D^T (D - DX - E)`.
pub fn grad_x_smooth(state: &AlmState, problem: &LrrProblem) -> DenseMatrix {
    let resid = problem.residual(&state.x, &state.e);
    -(problem.d.transpose() * (&state.u + resid * state.rho))
}

/// The `X` subproblem with `E`, `U` and `rho` frozen; `g = |X|_*`.
pub struct XSubproblem<'a> {
    pub problem: &'a LrrProblem,
    pub e: &'a DenseMatrix,
    pub u: &'a DenseMatrix,
    pub rho: f64,
    pub space: LowRankVariety,
    lipschitz: f64,
}

impl<'a> XSubproblem<'a> {
    pub fn new(problem: &'a LrrProblem, e: &'a DenseMatrix, u: &'a DenseMatrix, rho: f64, r: usize) -> Result<Self> {
        let n = problem.samples();
        let dmax = crate::linalg::thin_svd(&problem.d)?
            .sigma
            .get(0)
            .copied()
            .unwrap_or(0.0);
        Ok(XSubproblem {
            problem,
            e,
            u,
            rho,
            space: LowRankVariety::new(n, n, r)?,
            lipschitz: rho * dmax * dmax,
        })
    }

    /// `W` with ambient gradient `D^T W`: `W = -(U + rho R)`.
    fn gradient_weights(&self, x: &FactoredPoint) -> DenseMatrix {
        let resid = self.problem.residual(x, self.e);
        -(self.u + resid * self.rho)
    }
}

impl CompositeProblem for XSubproblem<'_> {
    type Space = LowRankVariety;

    fn manifold(&self) -> &LowRankVariety {
        &self.space
    }

    /// Includes the constant `lambda |E|_{2,1}` so that `F` is the full
    /// augmented Lagrangian.
    fn smooth_value(&self, x: &FactoredPoint) -> f64 {
        let resid = self.problem.residual(x, self.e);
        self.problem.lambda * l21_norm(self.e) + smooth_part(self.u, self.rho, &resid)
    }

    fn euclidean_gradient(&self, x: &FactoredPoint) -> DenseMatrix {
        self.problem.d.transpose() * self.gradient_weights(x)
    }

    /// The gradient `D^T W` has rank at most `rows(D)`; project it in factored form.
    fn riemannian_gradient(&self, x: &FactoredPoint) -> ConeTangent {
        let w = self.gradient_weights(x);
        project_cone_factored(x, &self.problem.d.transpose(), &w.transpose(), self.space.r)
            .expect("cone projection SVD failed")
    }

    fn nonsmooth_value(&self, x: &FactoredPoint) -> f64 {
        x.nuclear_norm()
    }

    fn has_nonsmooth(&self) -> bool {
        true
    }

    /// `svt(R_Y(-grad / alpha), 1 / alpha)`.
    fn prox_step(&self, y: &FactoredPoint, grad: &ConeTangent, alpha: f64) -> Result<FactoredPoint> {
        let moved = retract_variety(y, &grad.scaled(-1.0 / alpha), self.space.r)?;
        let shrunk = svt(&moved.as_svd(), ShrinkThreshold::new(1.0 / alpha)?);
        Ok(FactoredPoint::from_svd(shrunk))
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.lipschitz)
    }
}

/// Result of one inner accelerated solve over `X`.
#[derive(Clone, Debug)]
pub struct XUpdate {
    pub x: FactoredPoint,
    pub alpha: f64,
    pub t: f64,
    pub iterations: usize,
    /// `F` at the warm start (inner row `k = 0`).
    pub start_objective: f64,
    pub step_norm: f64,
}

/// Inner accelerated proximal loop on `M_{<=r}` with `E`, `U`, `rho` fixed.
pub fn update_x(state: &AlmState, problem: &LrrProblem, config: &SolverConfig) -> Result<XUpdate> {
    let sub = XSubproblem::new(problem, &state.e, &state.u, state.rho, state.r)?;
    let out = foa_solve(&sub, config, &state.x)?;
    let last = out.trace.last().copied().expect("trace has the starting row");
    Ok(XUpdate {
        start_objective: out.trace.records[0].objective,
        x: out.x,
        alpha: out.alpha,
        t: last.t,
        iterations: out.iterations,
        step_norm: last.step_norm,
    })
}

/// Closed-form `E` update: column shrinkage of `D - DX + U/rho` by `lambda/rho`.
pub fn update_e(state: &AlmState, problem: &LrrProblem) -> Result<DenseMatrix> {
    let w = &problem.d - problem.apply(&state.x) + &state.u / state.rho;
    Ok(shrink_columns(&w, ShrinkThreshold::new(problem.lambda / state.rho)?))
}

/// `U + rho (D - DX - E)` and `min(beta rho, rho_cap)`.
pub fn update_multiplier(state: &AlmState, problem: &LrrProblem) -> (DenseMatrix, f64) {
    let resid = problem.residual(&state.x, &state.e);
    let u = &state.u + resid * state.rho;
    let rho = (problem.beta * state.rho).min(problem.rho_cap);
    (u, rho)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlmConfig {
    /// Inner loop (`max_iter`, `eps1`, `eps2`) and outer loop
    /// (`max_outer`, `outer_eps1`, `outer_eps2`) settings.
    pub solver: SolverConfig,
    /// Stop the rank schedule when `|X|_* + lambda |E|_{2,1}` changes by at
    /// most this relative amount across a rank increment.
    pub rank_eps: f64,
    /// Upper bound on the rank budget.
    pub max_rank: Option<usize>,
    /// The outer loop also requires `|D - DX - E|_F <= residual_tol |D|_F`;
    /// without it the zero start passes the change test whenever
    /// `lambda / rho` is large enough to keep `E = 0`.
    pub residual_tol: f64,
}

impl Default for AlmConfig {
    fn default() -> Self {
        AlmConfig {
            solver: SolverConfig {
                max_iter: 300,
                max_outer: 60,
                ..SolverConfig::default()
            },
            rank_eps: 1e-4,
            max_rank: None,
            residual_tol: 1e-6,
        }
    }
}

/// One trace row per outer ALM iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmRecord {
    pub iter: IterationRecord,
    pub outer_k: usize,
    pub r: usize,
    pub rho: f64,
    /// `|D - DX - E|_F`.
    pub residual: f64,
}

pub const ALM_TRACE_HEADER: &str = "k,objective,alpha,t,step_norm,rank,ms,outer_k,r,rho,residual";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankStop {
    /// Budget exceeded `rank(D) - 1`.
    RankLimit,
    /// Objective did not improve across the last rank increment.
    Stationary,
    /// Budget reached `n` or the configured maximum.
    BudgetExhausted,
    /// Zero data.
    ZeroData,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub r: usize,
    /// ALM objective at the warm start of this rank.
    pub first_objective: f64,
    /// ALM objective after the last outer iteration at this rank.
    pub final_objective: f64,
    /// `|X|_* + lambda |E|_{2,1}` at the end of this rank.
    pub lrr_objective: f64,
    pub outer_iterations: usize,
    pub stop: StopReason,
}

#[derive(Clone, Debug)]
pub struct LrrOutcome {
    pub state: AlmState,
    pub trace: Vec<AlmRecord>,
    pub ranks: Vec<RankSummary>,
    pub rank_stop: RankStop,
    /// Numerical rank of `D`.
    pub data_rank: usize,
}

impl LrrOutcome {
    pub fn residual_norm(&self, problem: &LrrProblem) -> f64 {
        problem.residual(&self.state.x, &self.state.e).norm()
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        debug_assert!(ALM_TRACE_HEADER.starts_with(TRACE_HEADER));
        writeln!(w, "{ALM_TRACE_HEADER}")?;
        for r in &self.trace {
            writeln!(
                w,
                "{},{},{},{:e},{:e}",
                r.iter.csv_row(),
                r.outer_k,
                r.r,
                r.rho,
                r.residual
            )?;
        }
        Ok(())
    }
}

/// Subspace pursuit over rank budgets with an ALM solve at each budget.
pub fn sp_rprg_alm(problem: &LrrProblem, config: &AlmConfig) -> Result<LrrOutcome> {
    config.solver.validate()?;
    let started = Instant::now();
    let n = problem.samples();
    let mut state = AlmState::initial(problem);
    let data_rank = matrix_rank(&problem.d)?;
    if data_rank == 0 {
        return Ok(LrrOutcome {
            state,
            trace: Vec::new(),
            ranks: Vec::new(),
            rank_stop: RankStop::ZeroData,
            data_rank,
        });
    }
    let max_rank = config.max_rank.unwrap_or(n).min(n);
    let d_norm = problem.d.norm();
    let mut inner_cfg = config.solver.clone();
    let mut trace = Vec::new();
    let mut ranks: Vec<RankSummary> = Vec::new();
    let mut k_total = 0;
    let mut outer_total = 0;

    let rank_stop = loop {
        let first_objective = alm_objective(&state, problem);
        let mut stop = StopReason::MaxIterations;
        let mut outer_here = 0;
        for _ in 0..config.solver.max_outer {
            outer_total += 1;
            outer_here += 1;
            let upd = update_x(&state, problem, &inner_cfg)
                .map_err(|e| e.context(format!("rank {} outer iteration {outer_here}", state.r)))?;
            inner_cfg.alpha0 = Some(upd.alpha);
            k_total += upd.iterations;
            let x_change = (upd.x.to_dense() - state.x.to_dense()).norm();
            state.x = upd.x;
            let e_new = update_e(&state, problem)?;
            let e_change = (&e_new - &state.e).norm();
            state.e = e_new;
            let (u, rho) = update_multiplier(&state, problem);
            state.u = u;
            state.rho = rho;

            let residual = problem.residual(&state.x, &state.e).norm();
            trace.push(AlmRecord {
                iter: IterationRecord {
                    k: k_total,
                    objective: alm_objective(&state, problem),
                    alpha: upd.alpha,
                    t: upd.t,
                    step_norm: x_change,
                    rank: state.x.rank(),
                    ms: if config.solver.record_time {
                        started.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    },
                },
                outer_k: outer_total,
                r: state.r,
                rho: state.rho,
                residual,
            });
            if x_change <= config.solver.outer_eps1
                && e_change <= config.solver.outer_eps2
                && residual <= config.residual_tol * d_norm
            {
                stop = StopReason::Stationary;
                break;
            }
        }
        let summary = RankSummary {
            r: state.r,
            first_objective,
            final_objective: alm_objective(&state, problem),
            lrr_objective: lrr_objective(&state.x, &state.e, problem.lambda),
            outer_iterations: outer_here,
            stop,
        };
        let previous = ranks.last().map(|s| s.lrr_objective);
        ranks.push(summary);

        if state.r + 1 > data_rank {
            break RankStop::RankLimit;
        }
        if let Some(prev) = previous {
            let change = (prev - summary.lrr_objective).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if change <= config.rank_eps {
                break RankStop::Stationary;
            }
        }
        if state.r >= max_rank {
            break RankStop::BudgetExhausted;
        }
        state.r = (state.r + problem.inc).min(max_rank);
    };

    Ok(LrrOutcome {
        state,
        trace,
        ranks,
        rank_stop,
        data_rank,
    })
}

/// Symmetric affinity `|X| + |X^T|`.
pub fn affinity(x: &FactoredPoint) -> DenseMatrix {
    let a = x.to_dense().abs();
    &a + a.transpose()
}
