//! `vbpomdp` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{BenchArgs, ExportArgs, FileConfig, SimulateArgs, SolveArgs, VbCheckArgs};

#[derive(Debug, Parser)]
#[command(name = "vbpomdp", version, about = "Continuous-state POMDP solving and pursuit simulation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "VBPOMDP_THREADS")]
    threads: Option<usize>,
    /// TOML file with per-command defaults; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a policy with point-based value iteration.
    Solve(SolveArgs),
    /// Run Monte-Carlo episodes for policies and baselines.
    Simulate(SimulateArgs),
    /// Compare clustered condensation against full Runnalls reduction.
    CondenseBench(BenchArgs),
    /// Check the variational softmax bound against quadrature.
    VbCheck(VbCheckArgs),
    /// Write a built-in scenario as JSON, as a template for custom ones.
    ExportScenario(ExportArgs),
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or values (exit 2).
    Config(String),
    /// The computation itself failed (exit 3).
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Solve(mut a) => {
            a.merge(file.solve);
            commands::solve(a)
        }
        Command::Simulate(mut a) => {
            a.merge(file.simulate);
            commands::simulate(a)
        }
        Command::CondenseBench(mut a) => {
            a.merge(file.condense_bench);
            commands::condense_bench(a)
        }
        Command::VbCheck(mut a) => {
            a.merge(file.vb_check);
            commands::vb_check(a)
        }
        Command::ExportScenario(a) => commands::export_scenario(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
