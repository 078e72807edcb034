//! `ingest`: validate an arbitrary-schema OHLC CSV and normalize it into
//! the canonical panel format consumed by every other command.

use std::io::Write;
use std::path::PathBuf;

use candlekit::market::csv_io::{load_ohlc_csv, write_ohlc_csv_to, CsvSchema};
use clap::Args;

use crate::artifact::{config_digest, Artifacts};
use crate::config::{resolve, resolve_required, Globals};
use crate::error::CliError;

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Input OHLC CSV (any column naming; see the --*-col overrides).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub date_col: Option<String>,
    #[arg(long)]
    pub symbol_col: Option<String>,
    #[arg(long)]
    pub open_col: Option<String>,
    #[arg(long)]
    pub high_col: Option<String>,
    #[arg(long)]
    pub low_col: Option<String>,
    #[arg(long)]
    pub close_col: Option<String>,
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let file = &globals.file;
    let csv: PathBuf = resolve_required(opts.csv, file, "csv")?;
    let defaults = CsvSchema::default();
    let schema = CsvSchema {
        date: resolve(opts.date_col, file, "date-col", defaults.date)?,
        symbol: resolve(opts.symbol_col, file, "symbol-col", defaults.symbol)?,
        open: resolve(opts.open_col, file, "open-col", defaults.open)?,
        high: resolve(opts.high_col, file, "high-col", defaults.high)?,
        low: resolve(opts.low_col, file, "low-col", defaults.low)?,
        close: resolve(opts.close_col, file, "close-col", defaults.close)?,
    };
    let digest = config_digest(
        "ingest",
        &[
            ("csv", csv.display().to_string()),
            ("date-col", schema.date.clone()),
            ("symbol-col", schema.symbol.clone()),
            ("open-col", schema.open.clone()),
            ("high-col", schema.high.clone()),
            ("low-col", schema.low.clone()),
            ("close-col", schema.close.clone()),
            ("seed", globals.seed.to_string()),
        ],
    );
    let art = Artifacts::new(&globals.out, globals.seed, digest)?;

    let load = load_ohlc_csv(&csv, &schema)?;
    let mut w = art.create_csv("panel.csv")?;
    write_ohlc_csv_to(&load.panel, &mut w)?;
    drop(w);

    if !load.rejected.is_empty() {
        let mut w = art.create_csv("rejected_rows.csv")?;
        writeln!(w, "line,symbol,reason")?;
        for r in &load.rejected {
            writeln!(
                w,
                "{},{},\"{}\"",
                r.line,
                r.symbol,
                r.reason.replace('"', "'")
            )?;
        }
    }

    println!(
        "ingested {} symbols, {} bars -> {} ({} rows rejected)",
        load.panel.symbol_count(),
        load.panel.bar_count(),
        art.path("panel.csv").display(),
        load.rejected.len()
    );
    Ok(())
}
