//! CSV ingestion and export of OHLC panels.
//!
//! Input files carry a header row and one bar per line; a single file may
//! hold many symbols. Lines starting with `#` are treated as comments so
//! panels written with artifact metadata headers load back unchanged.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use super::{Bar, MarketError, PricePanel};

/// Maps logical OHLC fields to the column names present in the file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub date: String,
    pub symbol: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            symbol: "symbol".into(),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
        }
    }
}

/// A structurally valid row rejected for violating a panel invariant.
#[derive(Clone, Debug)]
pub struct RejectedRow {
    pub line: u64,
    pub symbol: String,
    pub reason: String,
}

/// Result of a load: the clean panel plus the rows it rejected.
#[derive(Debug)]
pub struct CsvLoad {
    pub panel: PricePanel,
    pub rejected: Vec<RejectedRow>,
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, MarketError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| MarketError::MissingColumn(name.to_string()))
}

/// Load a panel from CSV.
///
/// Rows that fail to parse produce a single row error carrying the count
/// and first offending line. Rows that parse but violate the OHLC
/// invariants (or duplicate a (symbol, date) pair) are rejected and
/// collected; the load still succeeds.
pub fn load_ohlc_csv(path: &Path, schema: &CsvSchema) -> Result<CsvLoad, MarketError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let idx_date = column_index(&headers, &schema.date)?;
    let idx_symbol = column_index(&headers, &schema.symbol)?;
    let idx_open = column_index(&headers, &schema.open)?;
    let idx_high = column_index(&headers, &schema.high)?;
    let idx_low = column_index(&headers, &schema.low)?;
    let idx_close = column_index(&headers, &schema.close)?;

    let mut series: BTreeMap<String, Vec<Bar>> = BTreeMap::new();
    let mut seen: BTreeMap<(String, NaiveDate), ()> = BTreeMap::new();
    let mut rejected = Vec::new();
    let mut parse_failures = 0usize;
    let mut first_failure: Option<(u64, String)> = None;
    let mut rows = 0usize;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows += 1;

        let fail = |msg: String, failures: &mut usize, first: &mut Option<(u64, String)>| {
            *failures += 1;
            if first.is_none() {
                *first = Some((line, msg));
            }
        };

        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let date = match field(idx_date).parse::<NaiveDate>() {
            Ok(d) => d,
            Err(e) => {
                fail(
                    format!("bad date: {e}"),
                    &mut parse_failures,
                    &mut first_failure,
                );
                continue;
            }
        };
        let symbol = field(idx_symbol);
        if symbol.is_empty() {
            fail(
                "empty symbol".into(),
                &mut parse_failures,
                &mut first_failure,
            );
            continue;
        }
        let mut prices = [0.0f64; 4];
        let mut ok = true;
        for (slot, idx) in prices
            .iter_mut()
            .zip([idx_open, idx_high, idx_low, idx_close])
        {
            match field(idx).parse::<f64>() {
                Ok(v) => *slot = v,
                Err(e) => {
                    fail(
                        format!("bad price: {e}"),
                        &mut parse_failures,
                        &mut first_failure,
                    );
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let bar = Bar {
            date,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
        };
        if let Err(reason) = bar.validate() {
            rejected.push(RejectedRow {
                line,
                symbol,
                reason,
            });
            continue;
        }
        if seen.insert((symbol.clone(), date), ()).is_some() {
            rejected.push(RejectedRow {
                line,
                symbol,
                reason: format!("duplicate (symbol, date) pair at {date}"),
            });
            continue;
        }
        series.entry(symbol).or_default().push(bar);
    }

    if parse_failures > 0 {
        let (first_line, first_error) = first_failure.unwrap();
        return Err(MarketError::RowParse {
            count: parse_failures,
            first_line,
            first_error,
        });
    }
    if rows == 0 {
        return Err(MarketError::EmptyInput);
    }
    let panel = PricePanel::from_series(series)?;
    Ok(CsvLoad { panel, rejected })
}

/// Canonical CSV header used by panel exports.
pub const PANEL_HEADER: &str = "date,symbol,open,high,low,close";

/// Write a panel in the canonical schema with full float precision, so a
/// write/load round trip reproduces values exactly.
pub fn write_ohlc_csv_to<W: Write>(panel: &PricePanel, mut w: W) -> Result<(), MarketError> {
    writeln!(w, "{PANEL_HEADER}")?;
    for (symbol, bars) in panel.iter() {
        for bar in bars {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                bar.date, symbol, bar.open, bar.high, bar.low, bar.close
            )?;
        }
    }
    Ok(())
}

pub fn write_ohlc_csv(panel: &PricePanel, path: &Path) -> Result<(), MarketError> {
    let file = std::fs::File::create(path)?;
    write_ohlc_csv_to(panel, std::io::BufWriter::new(file))
}
