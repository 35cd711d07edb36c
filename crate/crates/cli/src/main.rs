use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mhess_cli::{run, Experiment, RunOptions};

#[derive(Parser)]
#[command(name = "mhess", version, about = "Complex m-Hessian experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dirichlet problem on a lattice domain.
    Solve(Common),
    /// Envelope of an obstacle, with the penalized ladder.
    Envelope(Common),
    /// Relative capacities of a compact family.
    Capacity(Common),
    /// Mass-capacity inequality for a Hölder potential.
    VerifyTheoremA(Common),
    /// Boundary-mass bound on collars near the boundary.
    VerifyLemma41(Common),
    /// Hölder exponent of the solution against the predicted bound.
    VerifyHolder(Common),
    /// Stability estimate and capacity-slice inequality.
    VerifyStability(Common),
    /// Volume-capacity inequality.
    VerifyVolumeCapacity(Common),
    /// Closed-form oracles.
    OracleSuite(Common),
    /// Lists the analytic function catalog.
    Registry,
}

#[derive(Args)]
struct Common {
    /// JSON configuration merged over the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// One thread, lexicographic sweeps; output is byte-reproducible.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Comma-separated mesh sizes replacing the configured ladder.
    #[arg(long, value_delimiter = ',')]
    resolution_override: Option<Vec<f64>>,
    /// Suppress per-assertion lines.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (exp, common) = match cli.command {
        Command::Solve(c) => (Experiment::Solve, c),
        Command::Envelope(c) => (Experiment::Envelope, c),
        Command::Capacity(c) => (Experiment::Capacity, c),
        Command::VerifyTheoremA(c) => (Experiment::VerifyTheoremA, c),
        Command::VerifyLemma41(c) => (Experiment::VerifyLemma41, c),
        Command::VerifyHolder(c) => (Experiment::VerifyHolder, c),
        Command::VerifyStability(c) => (Experiment::VerifyStability, c),
        Command::VerifyVolumeCapacity(c) => (Experiment::VerifyVolumeCapacity, c),
        Command::OracleSuite(c) => (Experiment::OracleSuite, c),
        Command::Registry => {
            for line in mhess_cli::registry_lines() {
                println!("{line}");
            }
            return ExitCode::SUCCESS;
        }
    };
    let opts = RunOptions {
        config: common.config,
        serial: common.serial,
        threads: common.threads,
        resolution_override: common.resolution_override,
        quiet: common.quiet,
    };
    match run(exp, &common.out, &opts) {
        Ok(outcome) => {
            println!("{}: {}", exp.name(), if outcome.passed { "pass" } else { "fail" });
            for f in &outcome.failures {
                eprintln!("  failed {f}");
            }
            println!("summary: {}", outcome.summary_path.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
