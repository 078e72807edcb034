//! Shared data assembly for model-facing commands, plus the prediction
//! CSV interchange format (symbol, date, p_neg, p_pos, decided, class).

use std::io::Write;
use std::path::{Path, PathBuf};

use candlekit::market::csv_io::{load_ohlc_csv, CsvSchema};
use candlekit::market::{
    compute_returns, label_returns, make_windows, Class, LabelSet, PricePanel, ReturnSeries,
    SplitConfig, WindowSet,
};
use chrono::NaiveDate;
use sha2::{Digest, Sha256};

use crate::artifact::{fmt_f64, Artifacts};
use crate::config::{resolve, FileConfig};
use crate::error::CliError;

/// Train/test date ranges and window length shared by several commands.
#[derive(Clone, Copy, Debug)]
pub struct SplitOpts {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub window_len: usize,
}

impl SplitOpts {
    /// Resolve split flags against the config file with the historical
    /// 1994-2004 / 2005-2015 defaults.
    #[allow(clippy::too_many_arguments)]
    pub fn resolve(
        file: &FileConfig,
        train_start: Option<NaiveDate>,
        train_end: Option<NaiveDate>,
        test_start: Option<NaiveDate>,
        test_end: Option<NaiveDate>,
        window_len: Option<usize>,
    ) -> Result<Self, CliError> {
        let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        Ok(Self {
            train_start: resolve(train_start, file, "train-start", date("1994-01-01"))?,
            train_end: resolve(train_end, file, "train-end", date("2004-12-31"))?,
            test_start: resolve(test_start, file, "test-start", date("2005-01-01"))?,
            test_end: resolve(test_end, file, "test-end", date("2015-12-31"))?,
            window_len: resolve(window_len, file, "window-len", 20)?,
        })
    }

    pub fn to_config(&self, noise_seed: u64) -> Result<SplitConfig, CliError> {
        Ok(SplitConfig::new(
            (self.train_start, self.train_end),
            (self.test_start, self.test_end),
            self.window_len,
            noise_seed,
        )?)
    }

    /// Test-range span in years, for growth-rate annualization.
    pub fn test_years(&self) -> f64 {
        let days = (self.test_end - self.test_start).num_days() + 1;
        days as f64 / 365.25
    }

    pub fn digest_parts(&self) -> Vec<(&'static str, String)> {
        vec![
            ("train-start", self.train_start.to_string()),
            ("train-end", self.train_end.to_string()),
            ("test-start", self.test_start.to_string()),
            ("test-end", self.test_end.to_string()),
            ("window-len", self.window_len.to_string()),
        ]
    }
}

/// Everything the model commands need from one panel.
pub struct Pipeline {
    pub panel: PricePanel,
    pub returns: ReturnSeries,
    pub labels: LabelSet,
    pub windows: WindowSet,
    pub data_digest: String,
}

/// Load a canonical-schema panel and derive returns, labels and windows.
pub fn build_pipeline(csv: &Path, split: &SplitOpts, seed: u64) -> Result<Pipeline, CliError> {
    let load = load_ohlc_csv(csv, &CsvSchema::default())?;
    if !load.rejected.is_empty() {
        eprintln!(
            "warning: {} row(s) rejected while loading {} (first at line {})",
            load.rejected.len(),
            csv.display(),
            load.rejected[0].line
        );
    }
    let panel = load.panel;
    let returns = compute_returns(&panel);
    for symbol in returns.skipped_symbols() {
        eprintln!("warning: symbol {symbol} skipped (fewer than two bars)");
    }
    let labels = label_returns(&returns, seed);
    let config = split.to_config(seed)?;
    let windows = make_windows(&panel, &labels, &config)?;
    Ok(Pipeline {
        panel,
        returns,
        labels,
        windows,
        data_digest: file_digest(csv)?,
    })
}

/// SHA-256 of a file's bytes, truncated for report headers.
pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let hex: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(hex[..16].to_string())
}

/// One row of a prediction export.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub symbol: String,
    pub date: NaiveDate,
    pub p: [f64; 2],
    pub decided: bool,
    pub class: Class,
}

/// A parsed prediction file.
#[derive(Clone, Debug)]
pub struct PredictionFile {
    pub model: String,
    pub alpha: Option<f64>,
    pub rows: Vec<PredictionRow>,
}

pub const PREDICTION_HEADER: &str = "symbol,date,p_neg,p_pos,decided,class";

/// Write a prediction export; the model name and threshold ride in the
/// metadata header.
pub fn write_predictions(
    art: &Artifacts,
    name: &str,
    model: &str,
    alpha: Option<f64>,
    rows: &[PredictionRow],
) -> Result<PathBuf, CliError> {
    let mut extra = vec![("model", model.to_string())];
    if let Some(a) = alpha {
        extra.push(("alpha", fmt_f64(a)));
    }
    let mut w = art.create_csv_with(name, &extra)?;
    writeln!(w, "{PREDICTION_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.symbol,
            r.date,
            fmt_f64(r.p[0]),
            fmt_f64(r.p[1]),
            r.decided,
            r.class.as_str()
        )?;
    }
    drop(w);
    Ok(art.path(name))
}

pub fn read_predictions(path: &Path) -> Result<PredictionFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut model = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let mut alpha = None;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(m) = comment.strip_prefix("model:") {
                model = m.trim().to_string();
            } else if let Some(a) = comment.strip_prefix("alpha:") {
                alpha = a.trim().parse::<f64>().ok();
            }
            continue;
        }
        if !saw_header {
            if line != PREDICTION_HEADER {
                return Err(CliError::data(format!(
                    "{}:{}: unexpected prediction header `{line}`",
                    path.display(),
                    lineno + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::data(format!(
                "{}:{}: expected 6 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let parse_err =
            |what: &str| CliError::data(format!("{}:{}: bad {what}", path.display(), lineno + 1));
        rows.push(PredictionRow {
            symbol: fields[0].to_string(),
            date: fields[1].parse().map_err(|_| parse_err("date"))?,
            p: [
                fields[2].parse().map_err(|_| parse_err("p_neg"))?,
                fields[3].parse().map_err(|_| parse_err("p_pos"))?,
            ],
            decided: fields[4].parse().map_err(|_| parse_err("decided flag"))?,
            class: match fields[5] {
                "positive" => Class::Positive,
                "negative" => Class::Negative,
                _ => return Err(parse_err("class")),
            },
        });
    }
    if !saw_header {
        return Err(CliError::data(format!(
            "{} contains no prediction rows",
            path.display()
        )));
    }
    Ok(PredictionFile { model, alpha, rows })
}

/// Labels of test windows keyed by (symbol, anchor date), for joining
/// prediction files back to ground truth.
pub fn test_label_index(
    windows: &WindowSet,
) -> std::collections::BTreeMap<(String, NaiveDate), Class> {
    windows
        .test
        .iter()
        .map(|w| ((w.symbol.clone(), w.anchor), w.label))
        .collect()
}

/// Join prediction rows with window labels, erroring on unknown points.
pub fn join_labels(
    pred: &PredictionFile,
    index: &std::collections::BTreeMap<(String, NaiveDate), Class>,
) -> Result<Vec<Class>, CliError> {
    pred.rows
        .iter()
        .map(|r| {
            index
                .get(&(r.symbol.clone(), r.date))
                .copied()
                .ok_or_else(|| {
                    CliError::data(format!(
                        "prediction for {} {} has no matching test window; \
                         check the split flags and seed",
                        r.symbol, r.date
                    ))
                })
        })
        .collect()
}
