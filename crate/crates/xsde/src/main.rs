use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use xsde::commands;
use xsde::config::RunConfig;

/// Series-expansion solver for linear time-delayed stochastic systems.
#[derive(Parser)]
#[command(name = "xsde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral-condition analysis: curve, eigenvalues, report, domain atlas.
    Spectral(RunArgs),
    /// Solve with the series expansion and emit the solution field.
    Solve(RunArgs),
    /// Run expansion and Euler-Maruyama on the same noise and compare.
    Compare(RunArgs),
    /// Hebbian-learning equilibrium connectivity.
    Wcn(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel sections.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(command: &Command) -> xsde::Result<()> {
    let args = match command {
        Command::Spectral(a) | Command::Solve(a) | Command::Compare(a) | Command::Wcn(a) => a,
    };
    if let Some(threads) = args.threads {
        // ignore the error if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match command {
        Command::Spectral(_) => commands::cmd_spectral(&cfg, &args.out),
        Command::Solve(_) => commands::cmd_solve(&cfg, &args.out),
        Command::Compare(_) => commands::cmd_compare(&cfg, &args.out),
        Command::Wcn(_) => commands::cmd_wcn(&cfg, &args.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
