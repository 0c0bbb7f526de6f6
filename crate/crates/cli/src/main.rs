//! `cvarlab`: generate benchmark SSPs, solve them for CVaR, evaluate the
//! resulting policies exactly or by simulation, and sweep grid parameters.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod model;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvarlab_core::{Error as CoreError, SolverKind};

use crate::model::ModelArgs;

#[derive(Parser, Debug)]
#[command(
    name = "cvarlab",
    version,
    about = "CVaR planning for stochastic shortest path problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a benchmark domain as a model JSON file.
    Generate(GenerateArgs),
    /// Solve a model on an atom grid and write the solution JSON.
    Solve(SolveArgs),
    /// Compare a solution's approximate values with exact (or simulated) ones.
    Evaluate(EvaluateArgs),
    /// Solve and evaluate over a grid of atom counts and smallest atoms.
    Sweep(SweepArgs),
    /// Monte-Carlo rollouts of a solution's policy.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Number of atoms |Y|.
    #[arg(long, default_value_t = 7)]
    atoms: usize,
    /// Smallest atom.
    #[arg(long, default_value_t = 0.1)]
    alpha0: f64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "viq")]
    solver: SolverKind,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Give up (exit code 3) after this many sweeps.
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
    #[arg(long)]
    out: std::path::PathBuf,
    /// Leave wall-clock times out of the output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Evaluator {
    Forpecvar,
    Mc,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Confidence levels to evaluate (comma separated); defaults to every atom.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Initial states (comma separated); defaults to the domain's start state.
    #[arg(long, value_delimiter = ',')]
    s0: Vec<usize>,
    #[arg(long, value_enum, default_value_t = Evaluator::Forpecvar)]
    evaluator: Evaluator,
    /// Rollouts per evaluation with `--evaluator mc`.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Rollout horizon with `--evaluator mc`.
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Solution JSON written by `solve`.
    #[arg(long)]
    solution: std::path::PathBuf,
    #[command(flatten)]
    eval: EvalArgs,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Also write each evaluation's trace as JSON.
    #[arg(long)]
    trace: Option<std::path::PathBuf>,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "viq")]
    solver: Vec<SolverKind>,
    #[arg(long, value_delimiter = ',', default_value = "7,13,25")]
    atoms: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001")]
    alpha0: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Give up (exit code 3) after this many sweeps.
    #[arg(long, default_value_t = 100_000)]
    max_iterations: usize,
    #[command(flatten)]
    eval: EvalArgs,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    solution: std::path::PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    /// Stop after this many seconds even if fewer samples were drawn.
    #[arg(long)]
    time_budget: Option<f64>,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

/// Argument problems the CLI reports with the validation exit code.
#[derive(Debug)]
pub struct Validation(pub String);

impl std::fmt::Display for Validation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Validation {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Validation>().is_some() {
        return 2;
    }
    match err.downcast_ref::<CoreError>() {
        Some(
            CoreError::InvalidModel(_)
            | CoreError::InvalidSpec(_)
            | CoreError::InvalidArgument(_)
            | CoreError::InvalidDistribution(_)
            | CoreError::DegenerateAlpha(_)
            | CoreError::ConcavityViolation { .. }
            | CoreError::Json(_),
        ) => 2,
        Some(CoreError::NonConvergence { .. }) => 3,
        Some(
            CoreError::ImproperPolicy(_)
            | CoreError::ImproperExtendedPolicy { .. }
            | CoreError::NoProperPolicy(_)
            | CoreError::TooManyFailures { .. },
        ) => 4,
        _ => 1,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CVARLAB_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            Validation(format!(
                "CVARLAB_THREADS must be a positive integer, got '{v}'"
            ))
        })?;
        if n == 0 {
            return Err(Validation("CVARLAB_THREADS must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Simulate(a) => commands::simulate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if let Some(CoreError::InvalidModel(violations)) = err.downcast_ref::<CoreError>() {
                for v in violations {
                    eprintln!("  {v}");
                }
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
