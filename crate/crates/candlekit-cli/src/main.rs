use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use candlekit_cli::commands;
use candlekit_cli::config::Globals;

/// Candlestick pattern evaluation and thresholded ConvNet ensembles over
/// daily OHLC panels.
#[derive(Parser, Debug)]
#[command(name = "candlekit", version, disable_help_subcommand = true)]
struct Cli {
    /// Flat key = value config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed recorded in every artifact.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate and normalize an OHLC CSV into the canonical panel format.
    Ingest(commands::ingest::Opts),
    /// Generate a seeded synthetic panel, optionally with a planted signal.
    Synth(commands::synth::Opts),
    /// Score the 24 built-in patterns and report conditional statistics.
    EvalPatterns(commands::eval_patterns::Opts),
    /// Train classifiers and export metrics, predictions and models.
    Train(commands::train::Opts),
    /// Recompute a confidence-threshold sweep for a prediction file.
    Sweep(commands::sweep::Opts),
    /// Average three CNN prediction files into the heterogeneous ensemble.
    Ensemble(commands::ensemble::Opts),
    /// Simulate decided predictions as daily trades under friction costs.
    Backtest(commands::backtest::Opts),
    /// AUC / Mann-Whitney significance for prediction files.
    Significance(commands::significance::Opts),
    /// Render a saved model's convolution filters as SVG diagrams.
    ExportFilters(commands::export_filters::Opts),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with exit 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let globals = match Globals::new(cli.config, cli.seed, cli.out) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Ingest(opts) => commands::ingest::run(opts, &globals),
        Command::Synth(opts) => commands::synth::run(opts, &globals),
        Command::EvalPatterns(opts) => commands::eval_patterns::run(opts, &globals),
        Command::Train(opts) => commands::train::run(opts, &globals),
        Command::Sweep(opts) => commands::sweep::run(opts, &globals),
        Command::Ensemble(opts) => commands::ensemble::run(opts, &globals),
        Command::Backtest(opts) => commands::backtest::run(opts, &globals),
        Command::Significance(opts) => commands::significance::run(opts, &globals),
        Command::ExportFilters(opts) => commands::export_filters::run(opts, &globals),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
