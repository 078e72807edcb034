//! `train`: fit one or more classifiers on the train split, select a
//! confidence threshold, and export per-epoch metrics, a threshold sweep,
//! test predictions, the serialized model and a run manifest.
//!
//! Threshold selection defaults to a chronological validation slice held
//! out of the training range; `--paper-mode` trains on the full range and
//! selects the threshold on test confidences instead (leaky, but mirrors
//! the published procedure).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use candlekit::market::{Class, LabeledWindow};
use candlekit::models::{
    build_model, knn_predict, select_threshold, tech_dataset, technical_feature_map,
    window_dataset, ModelKind, TechFilterBank,
};
use candlekit::nnet::{predict_classes, save_model, train_with, Optimizer, Tensor, TrainConfig};
use candlekit::num::{fnv1a64, mix_seed};
use candlekit::stats::accuracy;
use chrono::NaiveDate;
use clap::Args;
use serde::Serialize;

use crate::artifact::{config_digest, fmt_f64, Artifacts};
use crate::config::{resolve, resolve_required, Globals};
use crate::data::{build_pipeline, write_predictions, Pipeline, PredictionRow, SplitOpts};
use crate::error::CliError;

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Canonical panel CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Model kinds to train (repeatable or comma separated):
    /// mlp, tech-mlp, cnn-1, cnn-2, cnn-3, knn.
    #[arg(long = "model", value_delimiter = ',')]
    pub models: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// sgd, sgd-momentum or adam.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub train_start: Option<NaiveDate>,
    #[arg(long)]
    pub train_end: Option<NaiveDate>,
    #[arg(long)]
    pub test_start: Option<NaiveDate>,
    #[arg(long)]
    pub test_end: Option<NaiveDate>,
    #[arg(long)]
    pub window_len: Option<usize>,
    /// Fraction of test points the selected threshold should retain.
    #[arg(long)]
    pub retain: Option<f64>,
    /// Select the threshold on test confidences (published procedure).
    #[arg(long)]
    pub paper_mode: bool,
    /// Template length for the technically-filtered MLP.
    #[arg(long)]
    pub tech_m: Option<usize>,
    /// Chronological fraction of training windows held out for
    /// threshold selection.
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Neighbor count for the knn baseline.
    #[arg(long)]
    pub knn_k: Option<usize>,
}

struct Settings {
    csv: PathBuf,
    models: Vec<ModelKind>,
    epochs: usize,
    batch: usize,
    lr: f64,
    optimizer: Optimizer,
    split: SplitOpts,
    retain: f64,
    paper_mode: bool,
    tech_m: usize,
    val_fraction: f64,
    knn_k: usize,
}

fn settings(opts: Opts, globals: &Globals) -> Result<Settings, CliError> {
    let file = &globals.file;
    let models_raw = if opts.models.is_empty() {
        file.get("models")
            .unwrap_or("cnn-1")
            .split(',')
            .map(str::trim)
            .map(String::from)
            .collect()
    } else {
        opts.models
    };
    let models = models_raw
        .iter()
        .map(|s| s.parse::<ModelKind>().map_err(CliError::usage))
        .collect::<Result<Vec<_>, _>>()?;
    let optimizer = resolve(
        opts.optimizer,
        file,
        "optimizer",
        "sgd-momentum".to_string(),
    )?
    .parse::<Optimizer>()
    .map_err(CliError::usage)?;
    Ok(Settings {
        csv: resolve_required(opts.csv, file, "csv")?,
        models,
        epochs: resolve(opts.epochs, file, "epochs", 50)?,
        batch: resolve(opts.batch, file, "batch", 128)?,
        lr: resolve(opts.lr, file, "lr", 1e-2)?,
        optimizer,
        split: SplitOpts::resolve(
            file,
            opts.train_start,
            opts.train_end,
            opts.test_start,
            opts.test_end,
            opts.window_len,
        )?,
        retain: resolve(opts.retain, file, "retain", 0.01)?,
        paper_mode: opts.paper_mode || file.get("paper-mode").map(|v| v == "true").unwrap_or(false),
        tech_m: resolve(opts.tech_m, file, "tech-m", 1)?,
        val_fraction: resolve(opts.val_fraction, file, "val-fraction", 0.1)?,
        knn_k: resolve(opts.knn_k, file, "knn-k", 10)?,
    })
}

/// Dataset rows aligned with their (symbol, anchor) keys.
struct NetData {
    inputs: Tensor,
    labels: Vec<Class>,
    keys: Vec<(String, NaiveDate)>,
    dropped: usize,
}

fn net_data(
    kind: ModelKind,
    windows: &[LabeledWindow],
    features: Option<&candlekit::models::TechFeatureMap>,
) -> NetData {
    match kind {
        ModelKind::TechMlp => {
            let features = features.expect("tech features prepared");
            let (inputs, labels, dropped) = tech_dataset(windows, features);
            let keys = windows
                .iter()
                .filter(|w| {
                    features
                        .features
                        .contains_key(&(w.symbol.clone(), w.anchor))
                })
                .map(|w| (w.symbol.clone(), w.anchor))
                .collect();
            NetData {
                inputs,
                labels,
                keys,
                dropped,
            }
        }
        _ => {
            let (inputs, labels) = window_dataset(windows);
            NetData {
                inputs,
                labels,
                keys: windows
                    .iter()
                    .map(|w| (w.symbol.clone(), w.anchor))
                    .collect(),
                dropped: 0,
            }
        }
    }
}

/// Split training windows chronologically: the trailing `fraction` by
/// anchor date becomes the validation slice.
fn chronological_split(
    windows: &[LabeledWindow],
    fraction: f64,
) -> (Vec<LabeledWindow>, Vec<LabeledWindow>) {
    let mut ordered: Vec<&LabeledWindow> = windows.iter().collect();
    ordered.sort_by(|a, b| {
        a.anchor
            .cmp(&b.anchor)
            .then_with(|| a.symbol.cmp(&b.symbol))
    });
    let val_n = ((windows.len() as f64) * fraction).round() as usize;
    let cut = windows.len().saturating_sub(val_n);
    let fit = ordered[..cut].iter().map(|w| (*w).clone()).collect();
    let val = ordered[cut..].iter().map(|w| (*w).clone()).collect();
    (fit, val)
}

fn confidences(probs: &Tensor) -> Vec<f64> {
    (0..probs.rows())
        .map(|b| {
            let r = probs.row(b);
            r[0].max(r[1])
        })
        .collect()
}

fn prediction_rows(probs: &Tensor, keys: &[(String, NaiveDate)], alpha: f64) -> Vec<PredictionRow> {
    (0..probs.rows())
        .map(|b| {
            let p = probs.row(b);
            PredictionRow {
                symbol: keys[b].0.clone(),
                date: keys[b].1,
                p: [p[0], p[1]],
                decided: p[0].max(p[1]) >= alpha,
                class: if p[1] >= p[0] {
                    Class::Positive
                } else {
                    Class::Negative
                },
            }
        })
        .collect()
}

/// Threshold sweep over a fixed alpha grid (0.500 to 0.990, step 0.005):
/// retention and decided-subset accuracy at each level.
pub fn write_sweep_csv(
    art: &Artifacts,
    name: &str,
    probs: &[[f64; 2]],
    labels: &[Class],
    extra: &[(&str, String)],
) -> Result<(), CliError> {
    let mut w = art.create_csv_with(name, extra)?;
    writeln!(w, "alpha,decided,retention,accuracy")?;
    let n = probs.len();
    for step in 0..=98 {
        let alpha = 0.5 + step as f64 * 0.005;
        let mut decided = 0usize;
        let mut hits = 0usize;
        for (p, label) in probs.iter().zip(labels) {
            let conf = p[0].max(p[1]);
            if conf >= alpha {
                decided += 1;
                let class = if p[1] >= p[0] {
                    Class::Positive
                } else {
                    Class::Negative
                };
                if class == *label {
                    hits += 1;
                }
            }
        }
        let acc = if decided > 0 {
            fmt_f64(hits as f64 / decided as f64)
        } else {
            String::new()
        };
        writeln!(
            w,
            "{:.3},{},{},{}",
            alpha,
            decided,
            fmt_f64(decided as f64 / n as f64),
            acc
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest {
    model: String,
    config_digest: String,
    data_digest: String,
    seed: u64,
    model_seed: u64,
    epochs: usize,
    batch: usize,
    learning_rate: f64,
    optimizer: String,
    window_len: usize,
    paper_mode: bool,
    requested_retention: f64,
    alpha: Option<f64>,
    achieved_retention: Option<f64>,
    train_windows: usize,
    validation_windows: usize,
    test_windows: usize,
    dropped_rows: usize,
}

fn write_manifest(art: &Artifacts, name: &str, manifest: &Manifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::data(format!("manifest: {e}")))?;
    std::fs::write(art.path(name), json + "\n")?;
    Ok(())
}

fn train_network(
    kind: ModelKind,
    s: &Settings,
    pipeline: &Pipeline,
    art: &Artifacts,
    globals: &Globals,
) -> Result<(), CliError> {
    let kind_name = kind.as_str();
    let features = if kind == ModelKind::TechMlp {
        let bank = TechFilterBank::builtin(s.tech_m)?;
        Some(technical_feature_map(&pipeline.panel, &bank))
    } else {
        None
    };

    let (fit_windows, val_windows) = if s.paper_mode {
        (pipeline.windows.train.clone(), Vec::new())
    } else {
        chronological_split(&pipeline.windows.train, s.val_fraction)
    };
    if fit_windows.is_empty() {
        return Err(CliError::data(format!(
            "{kind_name}: no training windows in range"
        )));
    }
    if !s.paper_mode && val_windows.is_empty() {
        return Err(CliError::usage(format!(
            "{kind_name}: validation slice is empty; lower --val-fraction or use --paper-mode"
        )));
    }
    let fit = net_data(kind, &fit_windows, features.as_ref());
    let val = net_data(kind, &val_windows, features.as_ref());
    let test = net_data(kind, &pipeline.windows.test, features.as_ref());
    if test.labels.is_empty() {
        return Err(CliError::data(format!(
            "{kind_name}: no test windows in range"
        )));
    }

    let model_seed = mix_seed(&[globals.seed, fnv1a64(kind_name.as_bytes())]);
    let mut net = build_model(kind, s.split.window_len, model_seed)?;
    let config = TrainConfig {
        epochs: s.epochs,
        batch_size: s.batch,
        learning_rate: s.lr,
        optimizer: s.optimizer,
        seed: model_seed,
        shuffle: true,
    };

    let mut metrics = art.create_csv_with(
        &format!("metrics_{kind_name}.csv"),
        &[("model", kind_name.to_string())],
    )?;
    writeln!(metrics, "epoch,train_loss,train_accuracy,test_accuracy")?;
    train_with(&mut net, &fit.inputs, &fit.labels, &config, |net, em| {
        let preds = predict_classes(net, &test.inputs)?;
        let test_acc = preds
            .iter()
            .zip(&test.labels)
            .filter(|(a, b)| a == b)
            .count() as f64
            / test.labels.len() as f64;
        writeln!(
            metrics,
            "{},{},{},{}",
            em.epoch,
            fmt_f64(em.mean_loss),
            fmt_f64(em.train_accuracy),
            fmt_f64(test_acc)
        )
        .map_err(candlekit::nnet::NnetError::Io)?;
        Ok(())
    })?;
    drop(metrics);

    let test_probs = net.predict(&test.inputs)?;
    let selection_conf = if s.paper_mode {
        confidences(&test_probs)
    } else {
        let val_probs = net.predict(&val.inputs)?;
        let rows = prediction_rows(&val_probs, &val.keys, 0.5);
        write_predictions(
            art,
            &format!("val_predictions_{kind_name}.csv"),
            kind_name,
            None,
            &rows,
        )?;
        confidences(&val_probs)
    };
    let selection = select_threshold(&selection_conf, s.retain)?;
    if selection.underfilled {
        eprintln!(
            "warning: {kind_name}: retention {} of {} points keeps a single best point",
            s.retain,
            selection_conf.len()
        );
    }

    let rows = prediction_rows(&test_probs, &test.keys, selection.alpha);
    write_predictions(
        art,
        &format!("predictions_{kind_name}.csv"),
        kind_name,
        Some(selection.alpha),
        &rows,
    )?;

    let test_p: Vec<[f64; 2]> = rows.iter().map(|r| r.p).collect();
    write_sweep_csv(
        art,
        &format!("sweep_{kind_name}.csv"),
        &test_p,
        &test.labels,
        &[
            ("model", kind_name.to_string()),
            ("selected-alpha", fmt_f64(selection.alpha)),
        ],
    )?;

    let metadata = BTreeMap::from([
        ("kind".to_string(), kind_name.to_string()),
        ("config".to_string(), art.digest().to_string()),
        ("data".to_string(), pipeline.data_digest.clone()),
        ("alpha".to_string(), fmt_f64(selection.alpha)),
        ("train-seed".to_string(), model_seed.to_string()),
    ]);
    save_model(
        &net,
        metadata,
        &art.path(&format!("model_{kind_name}.json")),
    )?;

    write_manifest(
        art,
        &format!("manifest_{kind_name}.json"),
        &Manifest {
            model: kind_name.to_string(),
            config_digest: art.digest().to_string(),
            data_digest: pipeline.data_digest.clone(),
            seed: globals.seed,
            model_seed,
            epochs: s.epochs,
            batch: s.batch,
            learning_rate: s.lr,
            optimizer: s.optimizer.as_str().to_string(),
            window_len: s.split.window_len,
            paper_mode: s.paper_mode,
            requested_retention: s.retain,
            alpha: Some(selection.alpha),
            achieved_retention: Some(selection.achieved_retention),
            train_windows: fit.labels.len(),
            validation_windows: val.labels.len(),
            test_windows: test.labels.len(),
            dropped_rows: fit.dropped + val.dropped + test.dropped,
        },
    )?;

    let preds = predict_classes(&net, &test.inputs)?;
    let acc = accuracy(&test.labels, &preds)?;
    println!(
        "{kind_name}: test accuracy {acc:.4}, alpha {:.4}",
        selection.alpha
    );
    Ok(())
}

fn run_knn(
    s: &Settings,
    pipeline: &Pipeline,
    art: &Artifacts,
    globals: &Globals,
) -> Result<(), CliError> {
    let out = knn_predict(&pipeline.windows.train, &pipeline.windows.test, s.knn_k)?;
    if out.ties > 0 {
        eprintln!(
            "warning: knn: {} voting tie(s) broken toward positive",
            out.ties
        );
    }
    let rows: Vec<PredictionRow> = pipeline
        .windows
        .test
        .iter()
        .zip(&out.classes)
        .map(|(w, class)| PredictionRow {
            symbol: w.symbol.clone(),
            date: w.anchor,
            p: match class {
                Class::Positive => [0.0, 1.0],
                Class::Negative => [1.0, 0.0],
            },
            decided: true,
            class: *class,
        })
        .collect();
    write_predictions(art, "predictions_knn.csv", "knn", None, &rows)?;
    write_manifest(
        art,
        "manifest_knn.json",
        &Manifest {
            model: format!("knn-{}", s.knn_k),
            config_digest: art.digest().to_string(),
            data_digest: pipeline.data_digest.clone(),
            seed: globals.seed,
            model_seed: 0,
            epochs: 0,
            batch: 0,
            learning_rate: 0.0,
            optimizer: String::new(),
            window_len: s.split.window_len,
            paper_mode: false,
            requested_retention: s.retain,
            alpha: None,
            achieved_retention: None,
            train_windows: pipeline.windows.train.len(),
            validation_windows: 0,
            test_windows: pipeline.windows.test.len(),
            dropped_rows: 0,
        },
    )?;
    let labels: Vec<Class> = pipeline.windows.test.iter().map(|w| w.label).collect();
    let acc = accuracy(&labels, &out.classes)?;
    println!("knn (k={}): test accuracy {acc:.4}", s.knn_k);
    Ok(())
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let s = settings(opts, globals)?;
    let mut parts = vec![
        ("csv", s.csv.display().to_string()),
        (
            "models",
            s.models
                .iter()
                .map(|m| m.as_str())
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("epochs", s.epochs.to_string()),
        ("batch", s.batch.to_string()),
        ("lr", s.lr.to_string()),
        ("optimizer", s.optimizer.as_str().to_string()),
        ("retain", s.retain.to_string()),
        ("paper-mode", s.paper_mode.to_string()),
        ("tech-m", s.tech_m.to_string()),
        ("val-fraction", s.val_fraction.to_string()),
        ("knn-k", s.knn_k.to_string()),
        ("seed", globals.seed.to_string()),
    ];
    parts.extend(s.split.digest_parts());
    let digest = config_digest("train", &parts);
    let art = Artifacts::new(&globals.out, globals.seed, digest)?;

    let pipeline = build_pipeline(&s.csv, &s.split, globals.seed)?;
    for kind in &s.models {
        match kind {
            ModelKind::Knn => run_knn(&s, &pipeline, &art, globals)?,
            ModelKind::Ensemble => {
                return Err(CliError::usage(
                    "the ensemble is built from prediction files; use the `ensemble` command",
                ))
            }
            kind => train_network(*kind, &s, &pipeline, &art, globals)?,
        }
    }
    Ok(())
}
