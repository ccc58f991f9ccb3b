//! `gts`: synthesize corpora, extract templates, tune per-view masks and
//! evaluate view-invariant recognition.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "gts", version, about = "Gait recognition with genetic template segmentation")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic corpus into --out
    Synth {
        #[arg(long, default_value_t = 10)]
        subjects: u32,
    },
    /// Build the template store under --out/templates from --corpus
    Extract,
    /// Evolve one mask per view on the tuning subjects
    Tune,
    /// Classify evaluation probes with view-estimated routing
    Evaluate {
        /// Use the unmasked template for every view
        #[arg(long)]
        whole: bool,
    },
    /// Estimate the view of one sequence directory, or score the estimator on the store
    EstimateView {
        #[arg(long)]
        sequence: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> gts_core::Result<()> {
    let cfg = RunConfig::load(&cli.flags)?;
    if let Some(jobs) = cfg.jobs {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Synth { subjects } => commands::synth(&cfg, *subjects),
        Command::Extract => commands::extract(&cfg),
        Command::Tune => commands::tune(&cfg),
        Command::Evaluate { whole } => commands::evaluate(&cfg, *whole),
        Command::EstimateView { sequence } => commands::estimate_view(&cfg, sequence.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gts: {e}");
            ExitCode::FAILURE
        }
    }
}
