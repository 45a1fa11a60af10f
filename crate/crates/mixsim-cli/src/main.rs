//! One binary for the whole pipeline: pack corpora into shards, build
//! catalogs, simulate training mixtures, synthesize RIRs, score
//! estimates, and fuse feature matrices.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! stderr; data goes to stdout or to files named on the command line.

mod overrides;
mod verbs;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Argument-level problems: wrong flag combinations, malformed
    /// key=value pairs. Exit 1.
    #[error("{0}")]
    Usage(String),
    /// Everything that goes wrong after the command line made sense:
    /// missing files, bad audio, degenerate configs. Exit 2.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

/// Shorthand for mapping library errors onto data-error exits.
pub(crate) fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "mixsim",
    version,
    about = "Target-speaker mixture simulation and evaluation",
    after_help = "SNR convention: snr_db is target power over interferer power, so a \
                  positive value makes the interferer quieter than the target."
)]
struct Cli {
    /// Stderr log verbosity: off, error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "info", value_name = "LEVEL")]
    log_level: String,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Pack raw utterances listed in a TSV into tar shards plus a manifest.
    Pack(verbs::PackArgs),
    /// Build a corpus catalog and serialize it as TSV.
    Catalog(verbs::CatalogArgs),
    /// Generate training examples (mixture, reference, enrollment) from a corpus.
    Simulate(verbs::SimulateArgs),
    /// Mix explicit WAV files at fixed SNRs; no randomness involved.
    Mix(verbs::MixArgs),
    /// Synthesize one room impulse response and report its measured decay.
    RirGen(verbs::RirGenArgs),
    /// Score estimate/reference WAV pairs with SI-SNR and SNR.
    Metric(verbs::MetricArgs),
    /// Combine a feature matrix with a speaker embedding.
    Fuse(verbs::FuseArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed;
            // anything else is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    let level = cli
        .log_level
        .parse::<log::LevelFilter>()
        .unwrap_or(log::LevelFilter::Info);
    env_logger::Builder::new().filter_level(level).init();

    let result = match cli.verb {
        Verb::Pack(args) => verbs::run_pack(args),
        Verb::Catalog(args) => verbs::run_catalog(args),
        Verb::Simulate(args) => verbs::run_simulate(args),
        Verb::Mix(args) => verbs::run_mix(args),
        Verb::RirGen(args) => verbs::run_rir_gen(args),
        Verb::Metric(args) => verbs::run_metric(args),
        Verb::Fuse(args) => verbs::run_fuse(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
