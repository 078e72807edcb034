//! `synth`: generate a seeded synthetic OHLC panel, optionally with a
//! planted signal mapping recent closes to next-day drift.

use candlekit::market::csv_io::write_ohlc_csv_to;
use candlekit::market::synth::{generate_synthetic, GenSpec, MoveDirection, SignalRule};
use chrono::NaiveDate;
use clap::Args;

use crate::artifact::{config_digest, Artifacts};
use crate::config::{resolve, Globals};
use crate::error::CliError;

#[derive(Args, Debug, Default)]
pub struct Opts {
    #[arg(long)]
    pub symbols: Option<usize>,
    /// Bars per symbol.
    #[arg(long)]
    pub bars: Option<usize>,
    /// Daily return standard deviation (0 gives flat prices).
    #[arg(long)]
    pub volatility: Option<f64>,
    /// First bar date; bars land on business days.
    #[arg(long)]
    pub start: Option<NaiveDate>,
    /// Planted signal: none, run or reversion.
    #[arg(long)]
    pub signal: Option<String>,
    /// Close-move direction armed by the run signal: up or down.
    #[arg(long)]
    pub signal_direction: Option<String>,
    /// Consecutive moves required to arm the run signal.
    #[arg(long)]
    pub signal_run_length: Option<usize>,
    /// Drift added once the run signal is armed (fraction).
    #[arg(long)]
    pub signal_drift: Option<f64>,
    /// Reversion gain: next drift = -gain * last return.
    #[arg(long)]
    pub signal_gain: Option<f64>,
    /// Clamp on the last return before scaling by the gain.
    #[arg(long)]
    pub signal_cap: Option<f64>,
}

pub fn signal_from_settings(
    kind: &str,
    direction: &str,
    run_length: usize,
    drift: f64,
    gain: f64,
    cap: f64,
) -> Result<Option<SignalRule>, CliError> {
    match kind {
        "none" => Ok(None),
        "run" => {
            let direction = match direction {
                "up" => MoveDirection::Up,
                "down" => MoveDirection::Down,
                other => {
                    return Err(CliError::usage(format!(
                        "signal direction must be up or down, got `{other}`"
                    )))
                }
            };
            Ok(Some(SignalRule::RunDrift {
                direction,
                length: run_length,
                drift,
            }))
        }
        "reversion" => Ok(Some(SignalRule::Reversion { gain, cap })),
        other => Err(CliError::usage(format!(
            "signal must be none, run or reversion, got `{other}`"
        ))),
    }
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let file = &globals.file;
    let symbols = resolve(opts.symbols, file, "symbols", 5usize)?;
    let bars = resolve(opts.bars, file, "bars", 1000usize)?;
    let volatility = resolve(opts.volatility, file, "volatility", 0.01f64)?;
    let start = resolve(
        opts.start,
        file,
        "start",
        NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(),
    )?;
    let signal_kind = resolve(opts.signal, file, "signal", "none".to_string())?;
    let direction = resolve(
        opts.signal_direction,
        file,
        "signal-direction",
        "down".to_string(),
    )?;
    let run_length = resolve(opts.signal_run_length, file, "signal-run-length", 3usize)?;
    let drift = resolve(opts.signal_drift, file, "signal-drift", 0.005f64)?;
    let gain = resolve(opts.signal_gain, file, "signal-gain", 0.6f64)?;
    let cap = resolve(opts.signal_cap, file, "signal-cap", 0.03f64)?;
    let signal = signal_from_settings(&signal_kind, &direction, run_length, drift, gain, cap)?;

    let digest = config_digest(
        "synth",
        &[
            ("symbols", symbols.to_string()),
            ("bars", bars.to_string()),
            ("volatility", volatility.to_string()),
            ("start", start.to_string()),
            ("signal", signal_kind.clone()),
            ("signal-direction", direction),
            ("signal-run-length", run_length.to_string()),
            ("signal-drift", drift.to_string()),
            ("signal-gain", gain.to_string()),
            ("signal-cap", cap.to_string()),
            ("seed", globals.seed.to_string()),
        ],
    );
    let art = Artifacts::new(&globals.out, globals.seed, digest)?;

    let spec = GenSpec {
        symbols,
        bars,
        volatility,
        seed: globals.seed,
        start,
        signal,
    };
    let panel = generate_synthetic(&spec)?;
    let mut w = art.create_csv("panel.csv")?;
    write_ohlc_csv_to(&panel, &mut w)?;
    drop(w);
    println!(
        "generated {} symbols x {} bars -> {}",
        symbols,
        bars,
        art.path("panel.csv").display()
    );
    Ok(())
}
