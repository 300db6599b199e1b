use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riemfoa::harness::{default_suite, run_experiment, run_suite, ExperimentConfig, SolverKind, Status, Task};

#[derive(Parser)]
#[command(
    name = "riemfoa",
    version,
    about = "Accelerated proximal gradient on low-rank manifolds: benchmark runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Matrix completion on the fixed-rank manifold.
    Complete(RunArgs),
    /// Low-rank representation on a synthetic union of subspaces.
    Lrr(RunArgs),
    /// Euclidean lasso, cross-checked against plain FISTA.
    Sanity(RunArgs),
    /// Run a grid of experiments in parallel.
    BenchSuite(SuiteArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Foa,
    FoaNomom,
    Sd,
    Cg,
    SpRprgAlm,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Foa => SolverKind::Foa,
            SolverArg::FoaNomom => SolverKind::FoaNomom,
            SolverArg::Sd => SolverKind::Sd,
            SolverArg::Cg => SolverKind::Cg,
            SolverArg::SpRprgAlm => SolverKind::SpRprgAlm,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON file mirroring the experiment config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Oversampling factor.
    #[arg(long)]
    os: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Rank increment of the subspace pursuit.
    #[arg(long)]
    inc_l: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Outer ALM iterations per rank budget.
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    /// Relative residual target for completion (0 disables).
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    per_cluster: Option<usize>,
    #[arg(long)]
    ambient: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// Write zeros instead of wall-clock times, for reproducible outputs.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    /// JSON array of experiment configs; the default grid is used otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds `0..seeds` for the default grid.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

fn build_config(task: Task, a: RunArgs) -> riemfoa::Result<ExperimentConfig> {
    let default_solver = if task == Task::Lrr {
        SolverKind::SpRprgAlm
    } else {
        SolverKind::Foa
    };
    let mut c = match &a.config {
        Some(p) => {
            let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            let has_solver = v.get("solver").is_some();
            let mut c: ExperimentConfig = serde_json::from_value(v)?;
            if !has_solver {
                c.solver = default_solver;
            }
            c
        }
        None => ExperimentConfig {
            solver: default_solver,
            ..ExperimentConfig::default()
        },
    };
    c.task = task;
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { c.$field = v; })* };
    }
    set!(
        m,
        n,
        rank,
        os,
        seed,
        lambda,
        rho,
        beta,
        inc_l,
        residual_tol,
        clusters,
        per_cluster,
        ambient,
        noise,
        out
    );
    if let Some(s) = a.solver {
        c.solver = s.into();
    }
    if let Some(v) = a.max_iter {
        c.solver_config.max_iter = v;
    }
    if let Some(v) = a.max_outer {
        c.solver_config.max_outer = v;
    }
    if let Some(v) = a.eps1 {
        c.solver_config.eps1 = v;
    }
    if a.eps2.is_some() {
        c.solver_config.eps2 = a.eps2;
    }
    if a.no_timing {
        c.solver_config.record_time = false;
    }
    Ok(c)
}

fn run_one(task: Task, args: RunArgs) -> riemfoa::Result<bool> {
    let cfg = build_config(task, args)?;
    let summary = run_experiment(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(summary.status == Status::Ok)
}

fn run_bench(args: SuiteArgs) -> riemfoa::Result<bool> {
    let configs = match &args.config {
        Some(p) => serde_json::from_str::<Vec<ExperimentConfig>>(&std::fs::read_to_string(p)?)?,
        None => default_suite(&args.out, args.seeds),
    };
    let results = run_suite(&configs, &args.out, args.threads)?;
    print!("{}", std::fs::read_to_string(args.out.join("bench.csv"))?);
    Ok(results.iter().all(|r| matches!(r, Ok(s) if s.status == Status::Ok)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Complete(a) => run_one(Task::Complete, a),
        Command::Lrr(a) => run_one(Task::Lrr, a),
        Command::Sanity(a) => run_one(Task::Sanity, a),
        Command::BenchSuite(a) => run_bench(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
