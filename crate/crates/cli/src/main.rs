mod bench;
mod census;
mod expressiveness;
mod io;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Motif graph neural network toolkit.
#[derive(Debug, Parser)]
#[command(name = "mgnn", version, about)]
struct Cli {
    /// Worker threads for the motif census. MGNN_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the 13 motif count matrices of a graph.
    Census(census::Args),
    /// Train and evaluate a model for one or more seeds.
    Train(train::Args),
    /// Compare GCN and MGNN embeddings on a 1-WL-equivalent graph pair.
    Expressiveness(expressiveness::Args),
    /// Time the M13 census: enumeration oracle against the fast path.
    Bench(bench::Args),
}

/// A check the run was asked to make did not hold. Exit code 1.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    match std::env::var("MGNN_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("MGNN_THREADS must be a positive integer, got {v:?}"))?;
            Ok(Some(n))
        }
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = thread_count(cli.threads)?;
    if let Some(n) = threads {
        anyhow::ensure!(n > 0, "thread count must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Census(args) => census::run(args, threads),
        Command::Train(args) => train::run(args),
        Command::Expressiveness(args) => expressiveness::run(args),
        Command::Bench(args) => bench::run(args),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let failed_check = err.chain().any(|e| {
        e.is::<CheckFailed>()
            || matches!(
                e.downcast_ref::<mgnn_core::census::CensusError>(),
                Some(mgnn_core::census::CensusError::OracleMismatch { .. })
            )
            || matches!(
                e.downcast_ref::<mgnn_core::train::TrainError>(),
                Some(mgnn_core::train::TrainError::Divergence { .. })
            )
    });
    if failed_check {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Creates `dir` if needed and returns it.
pub fn ensure_dir(dir: &PathBuf) -> anyhow::Result<&PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| anyhow::anyhow!("cannot create {}: {e}", dir.display()))?;
    Ok(dir)
}
