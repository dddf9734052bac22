//! Experiment runner behind the `hetsign` binary.
//!
//! `hetsign <command> --config <file.json> --out <dir> [--seed N] [--reps N]`
//! writes `<out>/<command>/report.csv`, optional SVG plots and a
//! `provenance.json` that echoes the resolved configuration. Exit status is
//! 0 on success, 1 when a built-in check fails or a run errors, and 2 for
//! usage or configuration errors.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};

pub use config::ExperimentConfig;
pub use report::CommandOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Monte Carlo check of the one-hop expectations plus Z integrals.
    VerifyTheorems,
    /// Accuracy and dissonance of the three propagation regimes.
    Fig1,
    /// Discrimination-gap surfaces over (e, b).
    Zsurface,
    /// Dissonance of untrained propagation as depth grows.
    DissonanceDepth,
    /// Repeatedly drop the highest class and retrain.
    ClassAblation,
    /// Calibration weight sweep with validation-based selection.
    LambdaSweep,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "hetsign", version, about = "Signed message passing experiments")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON experiment configuration; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output root directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the repetition count.
    #[arg(long)]
    pub reps: Option<usize>,
}

pub fn run_command(command: Command, cfg: &ExperimentConfig) -> hetsign_core::Result<CommandOutput> {
    match command {
        Command::VerifyTheorems => commands::verify_theorems(cfg),
        Command::Fig1 => commands::fig1(cfg),
        Command::Zsurface => commands::zsurface(cfg),
        Command::DissonanceDepth => commands::dissonance_depth(cfg),
        Command::ClassAblation => commands::class_ablation(cfg),
        Command::LambdaSweep => commands::lambda_sweep(cfg),
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

fn resolve_config(cli: &Cli) -> hetsign_core::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = cli.reps {
        cfg.repetitions = reps;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("hetsign: configuration error: {e}");
            return EXIT_USAGE;
        }
    };
    let start = Instant::now();
    let output = match run_command(cli.command, &cfg) {
        Ok(output) => output,
        Err(e @ (hetsign_core::Error::Validation(_) | hetsign_core::Error::Parse { .. } | hetsign_core::Error::Io { .. })) => {
            eprintln!("hetsign: input error: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("hetsign: {e}");
            return EXIT_CHECK_FAILED;
        }
    };
    let dir = match report::write_outputs(&cli.out, &cli.command.name(), &cfg, &output, start.elapsed().as_secs_f64()) {
        Ok(dir) => dir,
        Err(e) => {
            eprintln!("hetsign: cannot write outputs: {e}");
            return EXIT_USAGE;
        }
    };
    for line in &output.summary {
        println!("{line}");
    }
    println!("wrote {}", dir.display());
    if output.passed {
        EXIT_OK
    } else {
        eprintln!("hetsign: {} checks failed", cli.command.name());
        EXIT_CHECK_FAILED
    }
}
