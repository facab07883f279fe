use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sphmean::cli::{cmd_forward, cmd_invert, cmd_phantom, cmd_report, cmd_verify, load_config};

/// Worker thread count for the parallel stages.
const THREADS_VAR: &str = "SPHMEAN_THREADS";

#[derive(Parser)]
#[command(name = "sphmean", version, about = "Circular-mean inversion pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration; built-in reference values when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding stage inputs and outputs.
    #[arg(long)]
    out: PathBuf,
    /// Override a configuration key, e.g. `--set grid.trace.t_count=256`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the phantom.
    Phantom(Common),
    /// Compute circular means and wave traces.
    Forward(Common),
    /// Reconstruct from a wave trace.
    Invert(Common),
    /// Run the verification reports.
    Verify(Common),
    /// Aggregate stage summaries.
    Report(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got `{v}`");
                return ExitCode::from(1);
            }
        }
    }
    let (common, stage): (&Common, fn(&_, &_) -> _) = match &cli.command {
        Command::Phantom(c) => (c, cmd_phantom),
        Command::Forward(c) => (c, cmd_forward),
        Command::Invert(c) => (c, cmd_invert),
        Command::Verify(c) => (c, cmd_verify),
        Command::Report(c) => (c, cmd_report),
    };
    let result = load_config(common.config.as_deref(), &common.overrides)
        .and_then(|cfg| stage(&cfg, &common.out));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks exceeded their thresholds");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
