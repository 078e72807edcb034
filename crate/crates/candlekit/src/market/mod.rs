//! OHLC market data: panels, returns, noisy binary labels, and standardized
//! rolling windows split by date.
//!
//! A window is a 4 x `window_len` matrix stored row-major with rows ordered
//! (open, close, low, high), the same layout used by pattern templates and
//! convolution filters. Windows are standardized jointly over all entries.

pub mod csv_io;
pub mod synth;

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::prelude::Distribution;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{fnv1a64, rng_from, standardize_in_place};

/// Standard deviation of the label noise (variance 1e-6).
pub const LABEL_NOISE_STD: f64 = 1e-3;

/// Smallest supported window length: longest built-in template (3) plus one.
pub const MIN_WINDOW_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("missing column `{0}` in csv header")]
    MissingColumn(String),
    #[error("{count} unparsable row(s); first at line {first_line}: {first_error}")]
    RowParse {
        count: usize,
        first_line: u64,
        first_error: String,
    },
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("invalid bar for {symbol} at {date}: {reason}")]
    InvalidBar {
        symbol: String,
        date: NaiveDate,
        reason: String,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One daily OHLC bar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl Bar {
    /// Check positivity and high/low containment of the body.
    pub fn validate(&self) -> Result<(), String> {
        let ps = [self.open, self.high, self.low, self.close];
        if ps.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be positive finite numbers".into());
        }
        if self.low > self.open.min(self.close) {
            return Err(format!("low {} above min(open, close)", self.low));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!("high {} below max(open, close)", self.high));
        }
        Ok(())
    }
}

/// Per-symbol dated OHLC series, sorted by symbol and date.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PricePanel {
    series: BTreeMap<String, Vec<Bar>>,
}

impl PricePanel {
    /// Build a panel, enforcing bar validity and strictly increasing dates.
    pub fn from_series(mut series: BTreeMap<String, Vec<Bar>>) -> Result<Self, MarketError> {
        for (symbol, bars) in series.iter_mut() {
            bars.sort_by_key(|b| b.date);
            for pair in bars.windows(2) {
                if pair[1].date <= pair[0].date {
                    return Err(MarketError::InvalidBar {
                        symbol: symbol.clone(),
                        date: pair[1].date,
                        reason: "duplicate or non-increasing date".into(),
                    });
                }
            }
            for bar in bars.iter() {
                bar.validate().map_err(|reason| MarketError::InvalidBar {
                    symbol: symbol.clone(),
                    date: bar.date,
                    reason,
                })?;
            }
        }
        Ok(Self { series })
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn bars(&self, symbol: &str) -> Option<&[Bar]> {
        self.series.get(symbol).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Bar])> {
        self.series.iter().map(|(s, b)| (s.as_str(), b.as_slice()))
    }

    pub fn symbol_count(&self) -> usize {
        self.series.len()
    }

    pub fn bar_count(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }
}

/// Copy the raw 4 x `len` window ending at bar index `anchor` into a
/// row-major matrix with rows (open, close, low, high).
pub fn raw_window(bars: &[Bar], anchor: usize, len: usize) -> Vec<f64> {
    assert!(anchor + 1 >= len && anchor < bars.len());
    let mut out = vec![0.0; 4 * len];
    for c in 0..len {
        let bar = &bars[anchor + 1 - len + c];
        out[c] = bar.open;
        out[len + c] = bar.close;
        out[2 * len + c] = bar.low;
        out[3 * len + c] = bar.high;
    }
    out
}

/// Per-symbol simple close-to-close returns, dated at the later bar.
#[derive(Clone, Debug, Default)]
pub struct ReturnSeries {
    series: BTreeMap<String, Vec<(NaiveDate, f64)>>,
    skipped: Vec<String>,
}

impl ReturnSeries {
    pub fn series(&self, symbol: &str) -> Option<&[(NaiveDate, f64)]> {
        self.series.get(symbol).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(NaiveDate, f64)])> {
        self.series.iter().map(|(s, r)| (s.as_str(), r.as_slice()))
    }

    /// Symbols excluded for having fewer than two bars.
    pub fn skipped_symbols(&self) -> &[String] {
        &self.skipped
    }

    /// The first return dated strictly after `anchor` for `symbol`, i.e. the
    /// next-day return of a position decided at `anchor`'s close.
    pub fn next_after(&self, symbol: &str, anchor: NaiveDate) -> Option<(NaiveDate, f64)> {
        let rets = self.series.get(symbol)?;
        let idx = rets.partition_point(|(d, _)| *d <= anchor);
        rets.get(idx).copied()
    }

    /// All return values pooled across symbols, in (symbol, date) order.
    pub fn pooled(&self) -> Vec<f64> {
        self.series
            .values()
            .flat_map(|r| r.iter().map(|(_, v)| *v))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Simple returns close(t)/close(t-1) - 1 per symbol; symbols with fewer
/// than two bars are skipped and recorded.
pub fn compute_returns(panel: &PricePanel) -> ReturnSeries {
    let mut series = BTreeMap::new();
    let mut skipped = Vec::new();
    for (symbol, bars) in panel.iter() {
        if bars.len() < 2 {
            skipped.push(symbol.to_string());
            continue;
        }
        let rets = bars
            .windows(2)
            .map(|p| (p[1].date, p[1].close / p[0].close - 1.0))
            .collect();
        series.insert(symbol.to_string(), rets);
    }
    ReturnSeries { series, skipped }
}

/// Binary next-day class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    Negative,
    Positive,
}

impl Class {
    pub fn as_str(&self) -> &'static str {
        match self {
            Class::Negative => "negative",
            Class::Positive => "positive",
        }
    }
}

/// Noisy binary labels keyed by (symbol, return date).
#[derive(Clone, Debug)]
pub struct LabelSet {
    labels: BTreeMap<(String, NaiveDate), Class>,
    seed: u64,
}

impl LabelSet {
    pub fn get(&self, symbol: &str, date: NaiveDate) -> Option<Class> {
        self.labels.get(&(symbol.to_string(), date)).copied()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, NaiveDate), &Class)> {
        self.labels.iter()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Label each return as positive iff return + g > 0 with g ~ N(0, 1e-6).
///
/// The noise draw is keyed by (seed, symbol, date), fixed at construction,
/// so labeling is reproducible bit-for-bit across runs and independent of
/// iteration order.
pub fn label_returns(returns: &ReturnSeries, seed: u64) -> LabelSet {
    let noise = Normal::new(0.0, LABEL_NOISE_STD).expect("valid normal");
    let mut labels = BTreeMap::new();
    for (symbol, rets) in returns.iter() {
        let sym_hash = fnv1a64(symbol.as_bytes());
        for &(date, ret) in rets {
            let mut rng = rng_from(&[seed, sym_hash, date.num_days_from_ce() as i64 as u64]);
            let g: f64 = noise.sample(&mut rng);
            let class = if ret + g > 0.0 {
                Class::Positive
            } else {
                Class::Negative
            };
            labels.insert((symbol.to_string(), date), class);
        }
    }
    LabelSet { labels, seed }
}

/// Train/test date ranges (inclusive), window length, and the label seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub window_len: usize,
    pub noise_seed: u64,
}

impl SplitConfig {
    pub fn new(
        train: (NaiveDate, NaiveDate),
        test: (NaiveDate, NaiveDate),
        window_len: usize,
        noise_seed: u64,
    ) -> Result<Self, MarketError> {
        if train.0 > train.1 || test.0 > test.1 {
            return Err(MarketError::Parameter("empty date range".into()));
        }
        if train.1 >= test.0 && test.1 >= train.0 {
            return Err(MarketError::Parameter(
                "train and test ranges overlap".into(),
            ));
        }
        if window_len < MIN_WINDOW_LEN {
            return Err(MarketError::Parameter(format!(
                "window length {window_len} below minimum {MIN_WINDOW_LEN}"
            )));
        }
        Ok(Self {
            train_start: train.0,
            train_end: train.1,
            test_start: test.0,
            test_end: test.1,
            window_len,
            noise_seed,
        })
    }

    fn in_train(&self, d: NaiveDate) -> bool {
        d >= self.train_start && d <= self.train_end
    }

    fn in_test(&self, d: NaiveDate) -> bool {
        d >= self.test_start && d <= self.test_end
    }
}

/// One standardized context window with its next-day label.
#[derive(Clone, Debug)]
pub struct LabeledWindow {
    pub symbol: String,
    /// Date of the last bar inside the window.
    pub anchor: NaiveDate,
    /// 4 x window_len, row-major (open, close, low, high), standardized.
    pub values: Vec<f64>,
    pub label: Class,
    /// Raw next-day simple return (fraction).
    pub next_return: f64,
    /// True when the raw window had zero variance and was zeroed out.
    pub degenerate: bool,
}

/// Standardized windows split into train and test by anchor date.
#[derive(Clone, Debug, Default)]
pub struct WindowSet {
    pub window_len: usize,
    pub train: Vec<LabeledWindow>,
    pub test: Vec<LabeledWindow>,
}

/// Build one window per (symbol, anchor) with full history and a next-day
/// label. A window belongs to the split containing its anchor date; the
/// label day must fall in the same split, so windows whose label crosses
/// the boundary are dropped.
pub fn make_windows(
    panel: &PricePanel,
    labels: &LabelSet,
    config: &SplitConfig,
) -> Result<WindowSet, MarketError> {
    let len = config.window_len;
    let mut set = WindowSet {
        window_len: len,
        ..WindowSet::default()
    };
    for (symbol, bars) in panel.iter() {
        if bars.len() < len + 1 {
            continue;
        }
        for anchor in (len - 1)..(bars.len() - 1) {
            let anchor_date = bars[anchor].date;
            let label_date = bars[anchor + 1].date;
            let split = if config.in_train(anchor_date) && config.in_train(label_date) {
                Some(true)
            } else if config.in_test(anchor_date) && config.in_test(label_date) {
                Some(false)
            } else {
                None
            };
            let Some(is_train) = split else { continue };
            let Some(label) = labels.get(symbol, label_date) else {
                continue;
            };
            let mut values = raw_window(bars, anchor, len);
            let degenerate = !standardize_in_place(&mut values);
            let window = LabeledWindow {
                symbol: symbol.to_string(),
                anchor: anchor_date,
                values,
                label,
                next_return: bars[anchor + 1].close / bars[anchor].close - 1.0,
                degenerate,
            };
            if is_train {
                set.train.push(window);
            } else {
                set.test.push(window);
            }
        }
    }
    Ok(set)
}
