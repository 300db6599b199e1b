//! Experiment runner behind the command-line tool: builds instances, runs a
//! solver, writes the trace CSV and a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{clustering_error, spectral_cluster};
use crate::error::{FoaError, Result};
use crate::io::{write_csv_file, write_factored, write_instance};
use crate::lrr::{affinity, sp_rprg_alm, AlmConfig, LrrProblem, RankStop};
use crate::problems::{generate_completion, generate_lasso, generate_union_subspaces, CompletionProblem, LassoProblem};
use crate::solver::{
    accepts, baseline_solve, foa_solve, foa_solve_observed, BaselineMethod, SolveOutcome, SolverConfig, StopReason,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Complete,
    Lrr,
    Sanity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Foa,
    FoaNomom,
    Sd,
    Cg,
    SpRprgAlm,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Complete => "complete",
            Task::Lrr => "lrr",
            Task::Sanity => "sanity",
        }
    }
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Foa => "foa",
            SolverKind::FoaNomom => "foa-nomom",
            SolverKind::Sd => "sd",
            SolverKind::Cg => "cg",
            SolverKind::SpRprgAlm => "sp-rprg-alm",
        }
    }
}

/// One experiment. JSON config files mirror this struct; solver settings
/// sit at the top level next to the instance parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub task: Task,
    pub solver: SolverKind,
    pub seed: u64,
    pub out: PathBuf,

    // matrix completion
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub os: f64,
    /// Stop once `|P_Omega(X - A)| / |P_Omega(A)|` reaches this; `<= 0` disables.
    pub residual_tol: f64,

    // low-rank representation on a synthetic union of subspaces
    pub lambda: f64,
    pub rho: f64,
    pub beta: f64,
    pub inc_l: usize,
    pub clusters: usize,
    pub subspace_dim: usize,
    pub per_cluster: usize,
    pub ambient: usize,
    pub noise: f64,
    pub rank_eps: f64,
    /// Outer ALM stop also needs `|D - DX - E| <= lrr_residual_tol |D|`.
    pub lrr_residual_tol: f64,

    // lasso sanity problem
    pub lasso_rows: usize,
    pub lasso_cols: usize,
    pub lasso_lambda_frac: f64,

    #[serde(flatten)]
    pub solver_config: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Complete,
            solver: SolverKind::Foa,
            seed: 0,
            out: PathBuf::from("out"),
            m: 100,
            n: 100,
            rank: 5,
            os: 3.0,
            residual_tol: 1e-6,
            lambda: 0.3,
            rho: 0.01,
            beta: 1.1,
            inc_l: 1,
            clusters: 2,
            subspace_dim: 1,
            per_cluster: 40,
            ambient: 20,
            noise: 0.0,
            rank_eps: 1e-4,
            lrr_residual_tol: 1e-6,
            lasso_rows: 50,
            lasso_cols: 20,
            lasso_lambda_frac: 0.1,
            solver_config: SolverConfig {
                max_iter: 300,
                max_outer: 60,
                ..SolverConfig::default()
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Rejects task/solver pairs that do not fit: the SD/CG baselines need
    /// `g = 0`, so they only run matrix completion.
    pub fn validate(&self) -> Result<()> {
        use SolverKind::*;
        let ok = match self.task {
            Task::Complete => matches!(self.solver, Foa | FoaNomom | Sd | Cg),
            Task::Sanity => matches!(self.solver, Foa | FoaNomom),
            Task::Lrr => self.solver == SpRprgAlm,
        };
        if !ok {
            let why = if matches!(self.solver, Sd | Cg) {
                " (steepest-descent and conjugate-gradient baselines require g = 0)"
            } else {
                ""
            };
            return Err(FoaError::InvalidParameter(format!(
                "solver {} cannot run task {}{why}",
                self.solver.name(),
                self.task.name()
            )));
        }
        self.solver_config.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: Task,
    pub solver: SolverKind,
    pub seed: u64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Index `k` of the last trace row.
    pub iterations: usize,
    /// Zero when timing is disabled.
    pub wall_ms: f64,
    /// Objective of the last trace row.
    pub final_objective: f64,
    /// `complete`: `|P_Omega(X - A)| / |P_Omega(A)|`; `lrr`:
    /// `|D - DX - E| / |D|`; `sanity`: last step length over `|x|`.
    pub relative_residual: f64,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fista_match: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fista_max_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clustering_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_stop: Option<RankStop>,
}

impl Summary {
    fn empty(cfg: &ExperimentConfig) -> Self {
        Summary {
            task: cfg.task,
            solver: cfg.solver,
            seed: cfg.seed,
            status: Status::Ok,
            error: None,
            iterations: 0,
            wall_ms: 0.0,
            final_objective: f64::NAN,
            relative_residual: f64::NAN,
            rank: 0,
            stop: None,
            fista_match: None,
            fista_max_deviation: None,
            clustering_error: None,
            rank_stop: None,
        }
    }
}

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Largest iterate deviation tolerated by the FISTA cross-check.
pub const FISTA_MATCH_TOL: f64 = 1e-10;

/// Runs one experiment and writes `trace.csv`, `summary.json` and the final
/// iterate into `config.out`. A solver failure is recorded in the summary
/// (status `error`) rather than returned; `Err` means the experiment could
/// not be set up or its files could not be written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary> {
    config.validate()?;
    fs::create_dir_all(&config.out)?;
    let started = Instant::now();
    let mut summary = Summary::empty(config);
    let result = match config.task {
        Task::Complete => run_complete(config, &mut summary),
        Task::Lrr => run_lrr(config, &mut summary),
        Task::Sanity => run_sanity(config, &mut summary),
    };
    if let Err(e) = result {
        match e {
            FoaError::Io(_) => return Err(e),
            other => {
                summary.status = Status::Error;
                summary.error = Some(other.to_string());
            }
        }
    }
    if config.solver_config.record_time {
        summary.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    }
    fs::write(
        config.out.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}

fn record_outcome<X>(summary: &mut Summary, out: &SolveOutcome<X>) {
    let last = out.trace.last().expect("trace has the starting row");
    summary.iterations = last.k;
    summary.final_objective = last.objective;
    summary.rank = last.rank;
    summary.stop = Some(out.stop);
}

fn write_trace(dir: &Path, csv: &str) -> Result<()> {
    fs::write(dir.join(TRACE_FILE), csv)?;
    Ok(())
}

fn run_complete(cfg: &ExperimentConfig, summary: &mut Summary) -> Result<()> {
    let inst = generate_completion(cfg.m, cfg.n, cfg.rank, cfg.os, cfg.seed)?;
    write_instance(&inst, cfg.seed, &cfg.out)?;
    let problem = CompletionProblem::new(inst.observations.clone(), cfg.rank)?;
    let x0 = inst.spectral_start()?;
    let mut solver_cfg = cfg.solver_config.clone();
    if cfg.residual_tol > 0.0 {
        let target = cfg.residual_tol * inst.observations.norm();
        solver_cfg.target_objective = Some(0.5 * target * target);
    }
    let out = match cfg.solver {
        SolverKind::Foa => foa_solve(&problem, &solver_cfg, &x0),
        SolverKind::FoaNomom => {
            solver_cfg.momentum = false;
            foa_solve(&problem, &solver_cfg, &x0)
        }
        SolverKind::Sd => baseline_solve(&problem, BaselineMethod::SteepestDescent, &solver_cfg, &x0),
        SolverKind::Cg => baseline_solve(&problem, BaselineMethod::ConjugateGradient, &solver_cfg, &x0),
        SolverKind::SpRprgAlm => unreachable!("rejected by validate"),
    }?;
    write_trace(&cfg.out, &out.trace.to_csv_string())?;
    write_factored(&out.x, &cfg.out, "X")?;
    record_outcome(summary, &out);
    summary.relative_residual = inst.observations.relative_residual(&out.x);
    Ok(())
}

fn run_lrr(cfg: &ExperimentConfig, summary: &mut Summary) -> Result<()> {
    let (d, labels) = generate_union_subspaces(
        cfg.clusters,
        cfg.subspace_dim,
        cfg.per_cluster,
        cfg.ambient,
        cfg.noise,
        cfg.seed,
    )?;
    write_csv_file(&d, &cfg.out.join("D.csv"))?;
    let problem = LrrProblem::new(d, cfg.lambda, cfg.rho, cfg.beta, cfg.inc_l)?;
    let alm_cfg = AlmConfig {
        solver: cfg.solver_config.clone(),
        rank_eps: cfg.rank_eps,
        max_rank: None,
        residual_tol: cfg.lrr_residual_tol,
    };
    let out = sp_rprg_alm(&problem, &alm_cfg)?;
    let mut buf = Vec::new();
    out.write_trace_csv(&mut buf)?;
    fs::write(cfg.out.join(TRACE_FILE), buf)?;
    write_factored(&out.state.x, &cfg.out, "X")?;
    write_csv_file(&out.state.e, &cfg.out.join("E.csv"))?;

    if let Some(last) = out.trace.last() {
        summary.iterations = last.iter.k;
        summary.final_objective = last.iter.objective;
        summary.rank = last.iter.rank;
    }
    summary.stop = out.ranks.last().map(|r| r.stop);
    summary.rank_stop = Some(out.rank_stop);
    summary.relative_residual = out.residual_norm(&problem) / problem.d.norm().max(f64::MIN_POSITIVE);
    let pred = spectral_cluster(&affinity(&out.state.x), cfg.clusters, cfg.seed)?;
    summary.clustering_error = Some(clustering_error(&pred, &labels)?);
    Ok(())
}

fn run_sanity(cfg: &ExperimentConfig, summary: &mut Summary) -> Result<()> {
    let problem = generate_lasso(cfg.lasso_rows, cfg.lasso_cols, cfg.lasso_lambda_frac, cfg.seed)?;
    let mut solver_cfg = cfg.solver_config.clone();
    solver_cfg.momentum = cfg.solver == SolverKind::Foa;
    let x0 = nalgebra::DMatrix::zeros(cfg.lasso_cols, 1);
    let mut iterates = Vec::new();
    let out = foa_solve_observed(&problem, &solver_cfg, &x0, |_, x| iterates.push(x.as_slice().to_vec()))?;
    write_trace(&cfg.out, &out.trace.to_csv_string())?;
    write_csv_file(&out.x, &cfg.out.join("x.csv"))?;
    record_outcome(summary, &out);
    let last = out.trace.last().expect("starting row");
    summary.relative_residual = last.step_norm / out.x.norm().max(f64::MIN_POSITIVE);

    let reference = reference_fista(
        &problem,
        out.trace.records[0].alpha,
        solver_cfg.eta,
        out.iterations,
        solver_cfg.momentum,
    );
    let deviation = iterates
        .iter()
        .zip(&reference)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    let same_len = iterates.len() == reference.len();
    summary.fista_max_deviation = Some(deviation);
    summary.fista_match = Some(same_len && deviation <= FISTA_MATCH_TOL);
    Ok(())
}

/// Textbook FISTA with backtracking on plain slices, for cross-checking the
/// manifold solver on the Euclidean lasso. Returns `x_0, ..., x_iters`.
pub fn reference_fista(p: &LassoProblem, l0: f64, eta: f64, iters: usize, momentum: bool) -> Vec<Vec<f64>> {
    let (rows, cols) = p.a.shape();
    let a: Vec<f64> = p.a.as_slice().to_vec(); // column-major
    let b = p.b.as_slice();
    let lam = p.lambda;
    let matvec = |x: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; rows];
        for j in 0..cols {
            for i in 0..rows {
                r[i] += a[j * rows + i] * x[j];
            }
        }
        r
    };
    let f = |x: &[f64]| -> f64 {
        let ax = matvec(x);
        0.5 * ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>()
    };
    let grad = |x: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = matvec(x).iter().zip(b).map(|(u, v)| u - v).collect();
        (0..cols)
            .map(|j| (0..rows).map(|i| a[j * rows + i] * r[i]).sum())
            .collect()
    };
    let l1 = |x: &[f64]| x.iter().map(|v| v.abs()).sum::<f64>();

    let mut x = vec![0.0; cols];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut l = l0;
    let mut out = vec![x.clone()];
    for _ in 0..iters {
        let g = grad(&y);
        let fy = f(&y);
        let x_new = loop {
            let cand: Vec<f64> = y
                .iter()
                .zip(&g)
                .map(|(yi, gi)| {
                    let z = yi - gi / l;
                    z.signum() * (z.abs() - lam / l).max(0.0)
                })
                .collect();
            let d: Vec<f64> = cand.iter().zip(&y).map(|(c, yi)| c - yi).collect();
            let q = fy
                + d.iter().zip(&g).map(|(u, v)| u * v).sum::<f64>()
                + 0.5 * l * d.iter().map(|u| u * u).sum::<f64>()
                + lam * l1(&cand);
            if accepts(f(&cand) + lam * l1(&cand), q, fy) {
                break cand;
            }
            l *= eta;
        };
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = if momentum {
            x_new
                .iter()
                .zip(&x)
                .map(|(xn, xo)| xn + (t - 1.0) / t_next * (xn - xo))
                .collect()
        } else {
            x_new.clone()
        };
        t = t_next;
        x = x_new;
        out.push(x.clone());
    }
    out
}

/// Default benchmark grid: every completion solver plus one LRR and one
/// sanity run, for seeds `0..seeds`.
pub fn default_suite(out: &Path, seeds: u64) -> Vec<ExperimentConfig> {
    let mut v = Vec::new();
    for seed in 0..seeds {
        for solver in [SolverKind::Foa, SolverKind::FoaNomom, SolverKind::Sd, SolverKind::Cg] {
            v.push(ExperimentConfig {
                task: Task::Complete,
                solver,
                seed,
                ..ExperimentConfig::default()
            });
        }
        v.push(ExperimentConfig {
            task: Task::Lrr,
            solver: SolverKind::SpRprgAlm,
            seed,
            ..ExperimentConfig::default()
        });
        v.push(ExperimentConfig {
            task: Task::Sanity,
            solver: SolverKind::Foa,
            seed,
            ..ExperimentConfig::default()
        });
    }
    for c in &mut v {
        c.out = out.join(format!("{}-{}-seed{}", c.task.name(), c.solver.name(), c.seed));
    }
    v
}

pub const BENCH_TABLE_HEADER: &str = "task,solver,seed,status,iterations,wall_ms,final_objective,relative_residual";

/// Runs independent experiments on a worker pool (`threads = 0` uses the
/// default pool size) and writes `bench.csv` into `out`. Results are in
/// input order.
pub fn run_suite(configs: &[ExperimentConfig], out: &Path, threads: usize) -> Result<Vec<Result<Summary>>> {
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FoaError::InvalidParameter(format!("worker pool: {e}")))?;
    let results: Vec<Result<Summary>> = pool.install(|| configs.par_iter().map(run_experiment).collect());
    let mut table = String::from(BENCH_TABLE_HEADER);
    table.push('\n');
    for (cfg, r) in configs.iter().zip(&results) {
        let row = match r {
            Ok(s) => format!(
                "{},{},{},{},{},{:.3},{:e},{:e}",
                cfg.task.name(),
                cfg.solver.name(),
                cfg.seed,
                if s.status == Status::Ok { "ok" } else { "error" },
                s.iterations,
                s.wall_ms,
                s.final_objective,
                s.relative_residual
            ),
            Err(e) => format!("{},{},{},error: {e},,,,", cfg.task.name(), cfg.solver.name(), cfg.seed),
        };
        table.push_str(&row);
        table.push('\n');
    }
    fs::write(out.join("bench.csv"), table)?;
    Ok(results)
}
