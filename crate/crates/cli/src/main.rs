//! `isacsim`: run, validate and self-check bistatic ISAC experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use isac_core::harness::{self, oracle, ExperimentSpec, RunOptions};

#[derive(Parser)]
#[command(name = "isacsim", version, about = "Bistatic OFDM ISAC Monte Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv and manifest.json.
    Run {
        spec: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Override the number of Monte Carlo trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check an experiment spec without running it.
    Validate { spec: PathBuf },
    /// Run the noiseless on-grid oracle suite.
    Oracle,
}

fn load(path: &Path) -> anyhow::Result<ExperimentSpec> {
    ExperimentSpec::from_path(path).with_context(|| format!("invalid spec {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            spec,
            out,
            trials,
            seed,
            threads,
        } => {
            let parsed = load(&spec)?;
            let opts = RunOptions { trials, seed, threads };
            let result = harness::run_to_dir(&parsed, &opts, &out)
                .with_context(|| format!("experiment {} failed", spec.display()))?;
            println!(
                "wrote {} rows to {} in {:.1} s on {} threads",
                result.rows.len(),
                out.display(),
                result.wall_time_s,
                result.threads
            );
            Ok(true)
        }
        Command::Validate { spec } => {
            let parsed = load(&spec)?;
            println!(
                "{}: {:?}, {} sweep points, {} trials",
                spec.display(),
                parsed.kind,
                parsed.points().len(),
                parsed.n_trials
            );
            Ok(true)
        }
        Command::Oracle => {
            let checks = oracle::run_oracle_suite()?;
            let mut ok = true;
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
