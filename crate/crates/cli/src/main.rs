use clap::Parser;
use qlink_cli::error::CliError;
use qlink_cli::scenarios::Scenario;
use qlink_cli::{execute, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulates holonomic gates between two transmons linked by a multimode cable.
#[derive(Debug, Parser)]
#[command(name = "qlink", version)]
struct Args {
    /// dynamics, error-rate, robustness, fsr-sweep, leakage-distribution,
    /// optimize-frequencies or optimize-waveform
    scenario: String,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized initial knots; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel evaluations.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(args: Args) -> Result<(), CliError> {
    let scenario: Scenario = args.scenario.parse()?;
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
    }
    let options = RunOptions { out: args.out, seed: args.seed };
    let (report, dir) = execute(scenario, &args.config, &options)?;
    eprintln!("{} finished in {:.2} s, outputs in {}", scenario.name(), report.summary.runtime_s, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
