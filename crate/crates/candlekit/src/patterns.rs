//! Candlestick pattern templates: standardized 4 x m matrices with a
//! predicted direction.
//!
//! The 24 built-in chartist patterns (8 per length 1, 2, 3) live in a
//! versioned data file, `data/templates.toml`, as raw canonical OHLC
//! values and are standardized at load. Matrices are row-major with rows
//! ordered per [`ROW_LABELS`]; the same layout is used for price windows
//! and learned convolution filters, which keeps them directly comparable.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::standardize_in_place;

/// Fixed row ordering of every 4 x m candle matrix in this crate.
pub const ROW_LABELS: [&str; 4] = ["open", "close", "low", "high"];

/// Number of built-in patterns per length.
pub const BUILTINS_PER_LENGTH: usize = 8;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("unsupported built-in pattern length {0}; expected 1, 2 or 3")]
    UnsupportedLength(usize),
    #[error("degenerate template: fewer than two distinct values")]
    Degenerate,
    #[error("column {column}: {reason}")]
    Geometry { column: usize, reason: String },
    #[error("matrix has {got} entries, expected 4 x {length}")]
    Shape { got: usize, length: usize },
    #[error("template data file invalid: {0}")]
    DataFile(String),
}

/// Future direction a pattern is meant to presage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternDirection {
    Bullish,
    Bearish,
    /// For user-supplied or learned templates with no chartist reading.
    None,
}

impl PatternDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatternDirection::Bullish => "bullish",
            PatternDirection::Bearish => "bearish",
            PatternDirection::None => "none",
        }
    }
}

/// A standardized 4 x m pattern matrix with direction metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    name: String,
    length: usize,
    /// Row-major, rows per ROW_LABELS, zero mean and unit variance.
    matrix: Vec<f64>,
    direction: PatternDirection,
}

impl Template {
    /// Standardize a raw 4 x m row-major matrix into a template.
    ///
    /// The raw matrix must contain at least two distinct values and every
    /// column must satisfy low <= min(open, close) and
    /// high >= max(open, close).
    pub fn from_raw(
        name: impl Into<String>,
        raw: &[f64],
        length: usize,
        direction: PatternDirection,
    ) -> Result<Self, PatternError> {
        if length == 0 || raw.len() != 4 * length {
            return Err(PatternError::Shape {
                got: raw.len(),
                length,
            });
        }
        for c in 0..length {
            let (open, close, low, high) = (
                raw[c],
                raw[length + c],
                raw[2 * length + c],
                raw[3 * length + c],
            );
            if low > open.min(close) {
                return Err(PatternError::Geometry {
                    column: c,
                    reason: format!("low {low} above min(open, close)"),
                });
            }
            if high < open.max(close) {
                return Err(PatternError::Geometry {
                    column: c,
                    reason: format!("high {high} below max(open, close)"),
                });
            }
        }
        let mut matrix = raw.to_vec();
        if !standardize_in_place(&mut matrix) {
            return Err(PatternError::Degenerate);
        }
        Ok(Self {
            name: name.into(),
            length,
            matrix,
            direction,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of days (columns) the pattern spans.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn direction(&self) -> PatternDirection {
        self.direction
    }

    /// The standardized matrix, row-major per ROW_LABELS.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// (open, close, low, high) of one column.
    pub fn column(&self, c: usize) -> (f64, f64, f64, f64) {
        (
            self.matrix[c],
            self.matrix[self.length + c],
            self.matrix[2 * self.length + c],
            self.matrix[3 * self.length + c],
        )
    }
}

#[derive(Debug, Deserialize)]
struct TemplateRecord {
    name: String,
    length: usize,
    direction: PatternDirection,
    #[serde(default)]
    mirror_of: Option<String>,
    open: Vec<f64>,
    close: Vec<f64>,
    low: Vec<f64>,
    high: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    version: u32,
    template: Vec<TemplateRecord>,
}

/// Raw data file contents, the versioned interface for match reports.
pub const TEMPLATE_DATA: &str = include_str!("../data/templates.toml");

struct BuiltinData {
    templates: Vec<Template>,
    mirror_pairs: Vec<(String, String)>,
}

fn builtin_data() -> &'static BuiltinData {
    static DATA: OnceLock<BuiltinData> = OnceLock::new();
    DATA.get_or_init(|| parse_builtin(TEMPLATE_DATA).expect("bundled template data is valid"))
}

fn parse_builtin(text: &str) -> Result<BuiltinData, PatternError> {
    let file: TemplateFile =
        toml::from_str(text).map_err(|e| PatternError::DataFile(e.to_string()))?;
    if file.version != 1 {
        return Err(PatternError::DataFile(format!(
            "unsupported data version {}",
            file.version
        )));
    }
    let mut templates = Vec::with_capacity(file.template.len());
    let mut mirror_pairs = Vec::new();
    for rec in &file.template {
        let m = rec.length;
        if rec.open.len() != m || rec.close.len() != m || rec.low.len() != m || rec.high.len() != m
        {
            return Err(PatternError::DataFile(format!(
                "{}: row lengths disagree with length {m}",
                rec.name
            )));
        }
        let mut raw = Vec::with_capacity(4 * m);
        raw.extend_from_slice(&rec.open);
        raw.extend_from_slice(&rec.close);
        raw.extend_from_slice(&rec.low);
        raw.extend_from_slice(&rec.high);
        let template = Template::from_raw(rec.name.clone(), &raw, m, rec.direction)
            .map_err(|e| PatternError::DataFile(format!("{}: {e}", rec.name)))?;
        templates.push(template);
        if let Some(src) = &rec.mirror_of {
            mirror_pairs.push((src.clone(), rec.name.clone()));
        }
    }
    for m in 1..=3 {
        let count = templates.iter().filter(|t| t.length() == m).count();
        if count != BUILTINS_PER_LENGTH {
            return Err(PatternError::DataFile(format!(
                "expected {BUILTINS_PER_LENGTH} patterns of length {m}, found {count}"
            )));
        }
    }
    Ok(BuiltinData {
        templates,
        mirror_pairs,
    })
}

/// The 8 built-in patterns of length `m` (1, 2 or 3), in data-file order.
pub fn builtin_templates(m: usize) -> Result<Vec<Template>, PatternError> {
    if !(1..=3).contains(&m) {
        return Err(PatternError::UnsupportedLength(m));
    }
    Ok(builtin_data()
        .templates
        .iter()
        .filter(|t| t.length() == m)
        .cloned()
        .collect())
}

/// All 24 built-in patterns in data-file order.
pub fn all_builtin_templates() -> Vec<Template> {
    builtin_data().templates.clone()
}

/// (bullish, bearish) name pairs declared mirror-constructed in the data
/// file.
pub fn mirror_pairs() -> Vec<(String, String)> {
    builtin_data().mirror_pairs.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::mean_var_population;

    #[test]
    fn eight_builtins_per_length_with_balanced_directions() {
        for m in 1..=3 {
            let set = builtin_templates(m).unwrap();
            assert_eq!(set.len(), 8);
            let bullish = set
                .iter()
                .filter(|t| t.direction() == PatternDirection::Bullish)
                .count();
            assert_eq!(bullish, 4, "length {m}");
        }
    }

    #[test]
    fn unsupported_length_is_an_error() {
        assert!(matches!(
            builtin_templates(0),
            Err(PatternError::UnsupportedLength(0))
        ));
        assert!(matches!(
            builtin_templates(4),
            Err(PatternError::UnsupportedLength(4))
        ));
    }

    #[test]
    fn three_black_crows_is_bearish() {
        let set = builtin_templates(3).unwrap();
        let tbc = set
            .iter()
            .find(|t| t.name() == "Three Black Crows")
            .unwrap();
        assert_eq!(tbc.direction(), PatternDirection::Bearish);
    }

    #[test]
    fn every_builtin_is_standardized() {
        for t in all_builtin_templates() {
            let (mean, var) = mean_var_population(t.matrix());
            assert!(mean.abs() < 1e-9, "{}", t.name());
            assert!((var - 1.0).abs() < 1e-9, "{}", t.name());
        }
    }

    #[test]
    fn dragonfly_prototype_standardizes_by_hand() {
        // (open 100, close 100, low 90, high 100): deviations are
        // (2.5, 2.5, -7.5, 2.5), population variance 18.75.
        let t = Template::from_raw(
            "dragonfly",
            &[100.0, 100.0, 90.0, 100.0],
            1,
            PatternDirection::Bullish,
        )
        .unwrap();
        let expect = [
            2.5 / 18.75f64.sqrt(),
            2.5 / 18.75f64.sqrt(),
            -7.5 / 18.75f64.sqrt(),
            2.5 / 18.75f64.sqrt(),
        ];
        for (a, b) in t.matrix().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(t.matrix()[2] < 0.0);
        assert_eq!(t.matrix().iter().filter(|v| **v > 0.0).count(), 3);
    }

    #[test]
    fn standardization_is_idempotent() {
        let t = builtin_templates(1).unwrap().remove(0);
        let again = Template::from_raw(t.name(), t.matrix(), 1, t.direction()).unwrap();
        for (a, b) in t.matrix().iter().zip(again.matrix()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardization_is_affine_invariant() {
        for t in all_builtin_templates() {
            let scaled: Vec<f64> = t.matrix().iter().map(|v| 5.0 * v + 3.0).collect();
            let again = Template::from_raw(t.name(), &scaled, t.length(), t.direction()).unwrap();
            for (a, b) in t.matrix().iter().zip(again.matrix()) {
                assert!((a - b).abs() < 1e-9, "{}", t.name());
            }
        }
    }

    #[test]
    fn constant_matrix_is_degenerate() {
        let err = Template::from_raw("flat", &[1.0; 8], 2, PatternDirection::None);
        assert!(matches!(err, Err(PatternError::Degenerate)));
    }

    #[test]
    fn geometry_violations_are_rejected() {
        // open above high
        let err = Template::from_raw(
            "bad",
            &[105.0, 100.0, 99.0, 101.0],
            1,
            PatternDirection::None,
        );
        assert!(matches!(err, Err(PatternError::Geometry { .. })));
    }

    #[test]
    fn declared_mirror_pairs_negate_after_low_high_swap() {
        let all = all_builtin_templates();
        let by_name = |n: &str| all.iter().find(|t| t.name() == n).unwrap();
        let pairs = mirror_pairs();
        assert_eq!(pairs.len(), 12, "every bearish builtin is mirror-built");
        for (src, dst) in pairs {
            let a = by_name(&src);
            let b = by_name(&dst);
            let m = a.length();
            assert_eq!(m, b.length());
            for c in 0..m {
                let (ao, ac, al, ah) = a.column(c);
                let (bo, bc, bl, bh) = b.column(c);
                assert!((bo + ao).abs() < 1e-9, "{src}/{dst} open col {c}");
                assert!((bc + ac).abs() < 1e-9, "{src}/{dst} close col {c}");
                assert!((bl + ah).abs() < 1e-9, "{src}/{dst} low/high col {c}");
                assert!((bh + al).abs() < 1e-9, "{src}/{dst} high/low col {c}");
            }
        }
    }
}
