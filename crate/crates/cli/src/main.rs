//! `dklab`: run simulations and validation studies from a JSON config.
//!
//! Exit codes: 0 on success, 2 when a study verdict is `fail`, 1 on
//! configuration or runtime errors.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dklab_core::studies::Verdict;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] dklab_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Runtime(String),
}

#[derive(Debug, Parser)]
#[command(name = "dklab", version, about = "Langevin particles and regularised Dean-Kawasaki dynamics on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coupled interacting and mean-field particle run.
    Simulate,
    /// One regularised SPDE trajectory.
    Spde,
    /// Run a named validation study.
    Study { name: String },
    /// Roll up the latest report of every study under the output root.
    Report,
}

fn run(cli: Cli) -> Result<Option<Verdict>, CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if matches!(cli.command, Command::Report) => RunConfig::default(),
        None => return Err(CliError::Config("--config <path> is required".into())),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(j) = cli.jobs.or(cfg.jobs) {
        if j == 0 {
            return Err(CliError::Config("jobs must be >= 1".into()));
        }
        dklab_core::configure_threads(j)?;
    }
    match &cli.command {
        Command::Simulate => {
            let o = commands::simulate(&cfg, seed, &out)?;
            println!("simulate: wrote {}", o.dir.display());
            Ok(o.verdict)
        }
        Command::Spde => {
            let o = commands::spde(&cfg, seed, &out)?;
            println!("spde: wrote {}", o.dir.display());
            Ok(o.verdict)
        }
        Command::Study { name } => {
            let (o, report) = commands::study(name, &cfg, seed, &out)?;
            for c in &report.checks {
                let mark = match c.passed {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "n/a ",
                };
                println!("  [{mark}] {}: {:.6e} ({})", c.name, c.value, c.requirement);
            }
            println!(
                "study {name}: verdict {:?} in {:.1}s, wrote {}",
                report.verdict,
                report.runtime_seconds,
                o.dir.display()
            );
            Ok(o.verdict)
        }
        Command::Report => {
            let (path, entries) = commands::report(&out)?;
            for e in &entries {
                println!(
                    "{:<12} {:<13} slope {}",
                    e["study"].as_str().unwrap_or("?"),
                    e["verdict"].as_str().unwrap_or("?"),
                    e["fitted_slope"]
                );
            }
            println!("summary: {}", path.display());
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    // usage errors map to 1 so that 2 stays reserved for failed verdicts
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Some(Verdict::Fail)) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
