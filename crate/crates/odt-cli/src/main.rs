//! Batch front end for quality-controlled optical diffraction tomography:
//! simulate labeled field corpora, screen them with a spectral rule or a
//! trained network, train and evaluate that network, reconstruct
//! refractive-index volumes from the kept fields, and render saliency maps
//! explaining individual verdicts.
//!
//! Every subcommand reads one TOML config (all keys optional, flags
//! override) and derives all randomness from its seed, so identical
//! invocations write identical bytes. Exit codes: 0 success, 1 bad
//! arguments or config, 2 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use odt_core::OdtError;

mod commands;
mod config;
mod report;

use commands::{
    evaluate::EvaluateArgs, pipeline::PipelineArgs, reconstruct::ReconstructArgs,
    retrieve::RetrieveArgs, saliency::SaliencyArgs, screen::ScreenArgs,
    simulate::SimulateArgs, train::TrainArgs,
};

#[derive(Debug, Parser)]
#[command(
    name = "odtqc",
    version,
    about = "Screened optical diffraction tomography: simulate, screen, train, reconstruct",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// TOML run configuration; omitted keys use built-in defaults.
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed override for the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker-thread cap (0 = all cores); overrides ODTQC_THREADS and the
    /// config's `threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic field corpus with a manifest.
    Simulate(SimulateArgs),
    /// Demodulate an off-axis hologram back to a complex field.
    Retrieve(RetrieveArgs),
    /// Score manifest fields with the spectral rule or a trained network.
    Screen(ScreenArgs),
    /// Train the screening network on a corpus manifest.
    Train(TrainArgs),
    /// Evaluate a trained network against manifest labels.
    Evaluate(EvaluateArgs),
    /// Invert screened fields into a refractive-index volume.
    Reconstruct(ReconstructArgs),
    /// Render saliency maps explaining one classification.
    Saliency(SaliencyArgs),
    /// Run simulate, screen, train, reconstruct, and report end to end.
    Pipeline(PipelineArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap routes help to stdout and errors (with usage) to stderr.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> odt_core::Result<()> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    init_threads(resolve_threads(cli.threads, cfg.threads)?)?;

    match &cli.command {
        Command::Simulate(args) => commands::simulate::run(&cfg, args),
        Command::Retrieve(args) => commands::retrieve::run(&cfg, args),
        Command::Screen(args) => commands::screen::run(&cfg, args),
        Command::Train(args) => commands::train::run(&cfg, args),
        Command::Evaluate(args) => commands::evaluate::run(&cfg, args),
        Command::Reconstruct(args) => commands::reconstruct::run(&cfg, args),
        Command::Saliency(args) => commands::saliency::run(&cfg, args),
        Command::Pipeline(args) => commands::pipeline::run(&cfg, args),
    }
}

/// Validation failures are caller mistakes (1); I/O and file-format
/// failures point at the environment (2).
fn exit_code(error: &OdtError) -> u8 {
    match error {
        OdtError::Validation(_) => 1,
        OdtError::Io { .. } | OdtError::Format { .. } => 2,
    }
}

/// Thread-count precedence: flag, then ODTQC_THREADS, then the config key.
fn resolve_threads(flag: Option<usize>, config: usize) -> odt_core::Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("ODTQC_THREADS") {
        Ok(value) => value.parse().map_err(|_| {
            OdtError::validation(format!(
                "ODTQC_THREADS must be a thread count, got {value:?}"
            ))
        }),
        Err(_) => Ok(config),
    }
}

/// Caps the worker pool. Zero keeps the default (all available cores). The
/// cap trades wall time only; results are identical at any thread count.
fn init_threads(threads: usize) -> odt_core::Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| OdtError::validation(format!("thread pool: {e}")))
}
