//! `bsrnn`: enhancement, MACs analysis and tooling for band-split RNN models.

mod bench;
mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bsrnn_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "bsrnn",
    version,
    about = "Band-split RNN speech enhancement with cost analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance a mono 16 kHz WAV file (or every WAV file in a directory).
    Enhance(commands::EnhanceArgs),
    /// Report the MACs of a configuration.
    Analyze(commands::AnalyzeArgs),
    /// Compare the MACs of configuration variants against a base.
    Table(commands::TableArgs),
    /// Write seeded random weights for a configuration.
    GenWeights(commands::GenWeightsArgs),
    /// Measure wall-clock real-time factor.
    Bench(bench::BenchArgs),
    /// Search feature/hidden sizes that hit the reference baseline cost.
    Calibrate(commands::CalibrateArgs),
    /// Write the canonical configuration and its cost-reduction variants.
    Presets(commands::PresetsArgs),
}

/// Exit status per failure class.
fn exit_code(err: &anyhow::Error) -> (u8, &'static str) {
    if err.is::<commands::UsageError>() {
        return (64, "usage");
    }
    match err.downcast_ref::<Error>() {
        Some(Error::AudioFormat(_)) => (2, "audio-format"),
        Some(Error::Weights(_)) => (3, "weights"),
        Some(Error::Config(_)) | Some(Error::Shape(_)) => (4, "config"),
        Some(Error::InvalidInput(_)) => (5, "invalid-input"),
        Some(Error::Io(_)) => (6, "io"),
        None => match err.downcast_ref::<std::io::Error>() {
            Some(_) => (6, "io"),
            None => (1, "internal"),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Enhance(a) => commands::enhance(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Table(a) => commands::table(a),
        Command::GenWeights(a) => commands::gen_weights(a),
        Command::Bench(a) => bench::run(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Presets(a) => commands::presets(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = exit_code(&err);
            let msg = format!("{err:#}").replace('\n', " ");
            eprintln!("error[{kind}] {msg}");
            ExitCode::from(code)
        }
    }
}
