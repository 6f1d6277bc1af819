use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radgpr::cli::{self, CliError, RunOptions};

#[derive(Parser)]
#[command(
    name = "radgpr",
    version,
    about = "Distributed nearest-neighbor GPR experiments"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the communication schedule and config consistency.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the simulation and write metrics.csv, final_predictions.csv and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Select the prior variance over the network and report the fusion condition.
    SigmaF {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut stdout = std::io::stdout();
    let result: Result<bool, CliError> = match args.command {
        Command::Validate { config } => cli::cmd_validate(&config, &mut stdout).map(|o| o.passed),
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => cli::cmd_run(&config, &out, &RunOptions { seed, threads }).map(|m| {
            for p in &m.outputs {
                println!("wrote {}", p.display());
            }
            true
        }),
        Command::SigmaF { config } => {
            cli::cmd_sigma_f(&config, &mut stdout).map(|r| r.selection.condition.satisfied)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
