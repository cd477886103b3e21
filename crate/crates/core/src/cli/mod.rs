//! Command-line front end: `solve`, `table1` and `verify`, each driven by a flat
//! config file and writing CSV/text artifacts into an output directory.
//!
//! Exit codes: 0 success, 1 configuration error, 2 stopping rule or asserted
//! inequality not met, 3 oracle non-convergence, 4 divergence.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{build_testbed, noisy_data, reference_for, Testbed};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "monoreg",
    version,
    about = "Iterative regularization with discrepancy-principle stopping"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `problem.seed`; for `table1`, replaces `experiment.seeds`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single run: trace.csv, final.txt, solution.csv, report.txt.
    Solve(CommonArgs),
    /// Sweep over noise levels and seeds: table1.csv, table1_summary.csv.
    Table1(CommonArgs),
    /// Regularization-path inequalities: lemmas.csv, schedule_certificate.txt.
    Verify(CommonArgs),
}

fn load(args: &CommonArgs, sweep: bool) -> Result<(RunConfig, PathBuf), String> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| format!("cannot read {}: {e}", args.config.display()))?;
    let mut cfg = RunConfig::parse(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        if sweep {
            cfg.seeds = vec![seed];
        }
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                commands::EXIT_CONFIG
            } else {
                commands::EXIT_OK
            };
        }
    };
    let (args, sweep, cmd): (&CommonArgs, bool, fn(&RunConfig, &std::path::Path) -> i32) =
        match &cli.command {
            Command::Solve(a) => (a, false, commands::solve),
            Command::Table1(a) => (a, true, commands::table1),
            Command::Verify(a) => (a, false, commands::verify),
        };
    match load(args, sweep) {
        Ok((cfg, out)) => cmd(&cfg, &out),
        Err(msg) => {
            eprintln!("error: {msg}");
            commands::EXIT_CONFIG
        }
    }
}
