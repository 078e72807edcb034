//! The classifier zoo: MLP, technically-filtered MLP and 1/2/3-day CNNs,
//! plus confidence thresholding, top-centile threshold selection, the
//! heterogeneous probability-averaging ensemble, and a k-NN baseline.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use thiserror::Error;

use crate::market::raw_window;
use crate::market::{Class, LabeledWindow, PricePanel};
use crate::matcher::ncc_score;
use crate::nnet::{LayerSpec, Network, NnetError, Tensor};
use crate::patterns::{builtin_templates, PatternError, Template, BUILTINS_PER_LENGTH};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("misaligned inputs: expected length {expect}, got {got}")]
    Misaligned { expect: usize, got: usize },
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Every model the toolkit trains or evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    TechMlp,
    Cnn1,
    Cnn2,
    Cnn3,
    Ensemble,
    Knn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::TechMlp => "tech-mlp",
            ModelKind::Cnn1 => "cnn-1",
            ModelKind::Cnn2 => "cnn-2",
            ModelKind::Cnn3 => "cnn-3",
            ModelKind::Ensemble => "ensemble",
            ModelKind::Knn => "knn",
        }
    }

    /// Convolution filter width for the CNN variants.
    pub fn conv_width(&self) -> Option<usize> {
        match self {
            ModelKind::Cnn1 => Some(1),
            ModelKind::Cnn2 => Some(2),
            ModelKind::Cnn3 => Some(3),
            _ => None,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "tech-mlp" => Ok(ModelKind::TechMlp),
            "cnn-1" => Ok(ModelKind::Cnn1),
            "cnn-2" => Ok(ModelKind::Cnn2),
            "cnn-3" => Ok(ModelKind::Cnn3),
            "ensemble" => Ok(ModelKind::Ensemble),
            "knn" => Ok(ModelKind::Knn),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Dropout rate on convolution and dense layers.
pub const DROPOUT_RATE: f64 = 0.5;
/// Units per fully-connected layer.
pub const DENSE_UNITS: usize = 64;
/// Filters in the convolution layer.
pub const CONV_FILTERS: usize = 8;

fn dense_stack(mut specs: Vec<LayerSpec>, inputs: usize) -> Vec<LayerSpec> {
    specs.extend([
        LayerSpec::Dense {
            inputs,
            units: DENSE_UNITS,
        },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: DROPOUT_RATE },
        LayerSpec::Dense {
            inputs: DENSE_UNITS,
            units: DENSE_UNITS,
        },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: DROPOUT_RATE },
        LayerSpec::Dense {
            inputs: DENSE_UNITS,
            units: 2,
        },
        LayerSpec::Softmax,
    ]);
    specs
}

/// Build the network for a trainable model kind.
///
/// The MLP consumes the flattened 4 x window window (80 inputs at the
/// default length); the technically-filtered MLP consumes the per-day
/// 8-channel feature vector; cnn-m prepends a causal convolution of 8
/// filters of shape 4 x m whose flattened [8 x window] map feeds the same
/// dense stack.
pub fn build_model(kind: ModelKind, window_len: usize, seed: u64) -> Result<Network, ModelError> {
    let input_dim = 4 * window_len;
    let specs = match kind {
        ModelKind::Mlp => dense_stack(Vec::new(), input_dim),
        ModelKind::TechMlp => dense_stack(Vec::new(), BUILTINS_PER_LENGTH),
        ModelKind::Cnn1 | ModelKind::Cnn2 | ModelKind::Cnn3 => {
            let width = kind.conv_width().expect("cnn kinds carry a width");
            if width + 1 > window_len {
                return Err(ModelError::Parameter(format!(
                    "window length {window_len} too short for {} filters",
                    kind.as_str(),
                )));
            }
            dense_stack(
                vec![
                    LayerSpec::Conv {
                        filters: CONV_FILTERS,
                        width,
                        input_width: window_len,
                    },
                    LayerSpec::Relu,
                    LayerSpec::Dropout { rate: DROPOUT_RATE },
                ],
                CONV_FILTERS * window_len,
            )
        }
        ModelKind::Ensemble | ModelKind::Knn => {
            return Err(ModelError::Parameter(format!(
                "{} is not a trainable network kind",
                kind.as_str()
            )));
        }
    };
    let input = if kind == ModelKind::TechMlp {
        BUILTINS_PER_LENGTH
    } else {
        input_dim
    };
    Ok(Network::new(input, specs, seed)?)
}

/// The 8 built-in templates of one length stacked as a filter bank.
#[derive(Clone, Debug)]
pub struct TechFilterBank {
    templates: Vec<Template>,
    length: usize,
}

impl TechFilterBank {
    pub fn builtin(m: usize) -> Result<Self, ModelError> {
        let templates = builtin_templates(m)?;
        Ok(Self {
            templates,
            length: m,
        })
    }

    pub fn from_templates(templates: Vec<Template>) -> Result<Self, ModelError> {
        if templates.len() != BUILTINS_PER_LENGTH {
            return Err(ModelError::Parameter(format!(
                "filter bank needs {BUILTINS_PER_LENGTH} templates, got {}",
                templates.len()
            )));
        }
        let length = templates[0].length();
        if templates.iter().any(|t| t.length() != length) {
            return Err(ModelError::Parameter(
                "filter bank templates must share one length".into(),
            ));
        }
        Ok(Self { templates, length })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }
}

/// Per-day 8-channel technical feature vectors keyed by (symbol, date).
#[derive(Clone, Debug, Default)]
pub struct TechFeatureMap {
    pub features: BTreeMap<(String, NaiveDate), [f64; 8]>,
    /// Anchor days skipped for lacking m-day history.
    pub dropped: usize,
}

/// Cross-correlate the filter bank with every rolling window of the
/// panel. Channel j at a given day equals the matcher's similarity score
/// of template j anchored on that day, by construction of the shared
/// scoring routine.
pub fn technical_feature_map(panel: &PricePanel, bank: &TechFilterBank) -> TechFeatureMap {
    let m = bank.length();
    let mut out = TechFeatureMap::default();
    for (symbol, bars) in panel.iter() {
        out.dropped += bars.len().min(m - 1);
        if bars.len() < m {
            continue;
        }
        for anchor in (m - 1)..bars.len() {
            let raw = raw_window(bars, anchor, m);
            let mut channels = [0.0f64; 8];
            for (c, template) in bank.templates().iter().enumerate() {
                channels[c] = ncc_score(template, &raw);
            }
            out.features
                .insert((symbol.to_string(), bars[anchor].date), channels);
        }
    }
    out
}

/// Flatten labeled windows into an input tensor plus label vector.
pub fn window_dataset(windows: &[LabeledWindow]) -> (Tensor, Vec<Class>) {
    let cols = windows.first().map(|w| w.values.len()).unwrap_or(0);
    let mut data = Vec::with_capacity(windows.len() * cols);
    let mut labels = Vec::with_capacity(windows.len());
    for w in windows {
        data.extend_from_slice(&w.values);
        labels.push(w.label);
    }
    (
        Tensor::new(vec![windows.len(), cols], data).expect("windows share one shape"),
        labels,
    )
}

/// Dataset for the technically-filtered MLP: the 8-channel feature vector
/// at each window's anchor day. Windows without a feature row (shorter
/// history than the bank length) are dropped and counted.
pub fn tech_dataset(
    windows: &[LabeledWindow],
    features: &TechFeatureMap,
) -> (Tensor, Vec<Class>, usize) {
    let mut data = Vec::with_capacity(windows.len() * 8);
    let mut labels = Vec::with_capacity(windows.len());
    let mut dropped = 0usize;
    for w in windows {
        match features.features.get(&(w.symbol.clone(), w.anchor)) {
            Some(channels) => {
                data.extend_from_slice(channels);
                labels.push(w.label);
            }
            None => dropped += 1,
        }
    }
    let rows = labels.len();
    (
        Tensor::new(vec![rows, 8], data).expect("consistent shape"),
        labels,
        dropped,
    )
}

/// A probability pair with its thresholding outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdedPrediction {
    /// [p_negative, p_positive].
    pub probs: [f64; 2],
    pub confidence: f64,
    pub decided: bool,
    pub class: Class,
}

/// Decide every point whose max-class confidence reaches alpha; abstain
/// otherwise. Alpha lives in [0.5, 1).
pub fn apply_threshold(
    probs: &[[f64; 2]],
    alpha: f64,
) -> Result<Vec<ThresholdedPrediction>, ModelError> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(ModelError::Parameter(format!(
            "threshold alpha {alpha} outside [0.5, 1)"
        )));
    }
    Ok(probs
        .iter()
        .map(|p| {
            let confidence = p[0].max(p[1]);
            ThresholdedPrediction {
                probs: *p,
                confidence,
                decided: confidence >= alpha,
                class: if p[1] >= p[0] {
                    Class::Positive
                } else {
                    Class::Negative
                },
            }
        })
        .collect())
}

/// Outcome of selecting a confidence threshold from a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSelection {
    pub alpha: f64,
    /// Points at or above alpha in the selection sample (ties included).
    pub retained: usize,
    pub achieved_retention: f64,
    /// Set when retain * n fell below one and the single best point was
    /// kept instead.
    pub underfilled: bool,
}

/// Pick alpha as the smallest confidence that keeps the ceil(retain * n)
/// most confident points, i.e. the (1 - retain) quantile of max-class
/// confidences.
pub fn select_threshold(
    confidences: &[f64],
    retain: f64,
) -> Result<ThresholdSelection, ModelError> {
    if confidences.is_empty() {
        return Err(ModelError::Parameter("empty confidence sample".into()));
    }
    if !(0.0..1.0).contains(&retain) || retain <= 0.0 {
        return Err(ModelError::Parameter(format!(
            "retention {retain} outside (0, 1)"
        )));
    }
    let n = confidences.len();
    let target = retain * n as f64;
    // Guard the ceil against results one ulp above an integer.
    let k = ((target - 1e-9).ceil() as usize).clamp(1, n);
    let mut sorted = confidences.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite confidences"));
    let alpha = sorted[k - 1];
    let retained = sorted.iter().filter(|c| **c >= alpha).count();
    Ok(ThresholdSelection {
        alpha,
        retained,
        achieved_retention: retained as f64 / n as f64,
        underfilled: target < 1.0,
    })
}

/// Elementwise mean of exactly three aligned probability-pair sequences.
pub fn ensemble_proba(sets: &[&[[f64; 2]]]) -> Result<Vec<[f64; 2]>, ModelError> {
    if sets.len() != 3 {
        return Err(ModelError::Parameter(format!(
            "ensemble averages exactly three models, got {}",
            sets.len()
        )));
    }
    let n = sets[0].len();
    for s in sets {
        if s.len() != n {
            return Err(ModelError::Misaligned {
                expect: n,
                got: s.len(),
            });
        }
    }
    Ok((0..n)
        .map(|i| {
            let p0 = (sets[0][i][0] + sets[1][i][0] + sets[2][i][0]) / 3.0;
            let p1 = (sets[0][i][1] + sets[1][i][1] + sets[2][i][1]) / 3.0;
            [p0, p1]
        })
        .collect())
}

/// k-NN output with the number of voting ties observed.
#[derive(Clone, Debug)]
pub struct KnnOutput {
    pub classes: Vec<Class>,
    pub ties: usize,
}

/// Classify each test window by the majority label of its k nearest
/// training windows in Euclidean distance over the flattened entries.
/// Voting ties break toward the positive class and are counted.
pub fn knn_predict(
    train: &[LabeledWindow],
    test: &[LabeledWindow],
    k: usize,
) -> Result<KnnOutput, ModelError> {
    if train.is_empty() {
        return Err(ModelError::Parameter("empty training set".into()));
    }
    if k == 0 || k > train.len() {
        return Err(ModelError::Parameter(format!(
            "k = {k} outside 1..={}",
            train.len()
        )));
    }
    let mut classes = Vec::with_capacity(test.len());
    let mut ties = 0usize;
    for t in test {
        let mut dist: Vec<(f64, usize)> = train
            .iter()
            .enumerate()
            .map(|(i, tr)| {
                let d = tr
                    .values
                    .iter()
                    .zip(&t.values)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d, i)
            })
            .collect();
        dist.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite distance")
                .then(a.1.cmp(&b.1))
        });
        let positives = dist[..k]
            .iter()
            .filter(|(_, i)| train[*i].label == Class::Positive)
            .count();
        let negatives = k - positives;
        if positives == negatives {
            ties += 1;
        }
        classes.push(if positives >= negatives {
            Class::Positive
        } else {
            Class::Negative
        });
    }
    Ok(KnnOutput { classes, ties })
}
