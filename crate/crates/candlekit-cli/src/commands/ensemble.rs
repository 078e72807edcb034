//! `ensemble`: average the class probabilities of the three CNN
//! prediction files point by point, pick the ensemble's own confidence
//! threshold, and export it as a new prediction file.
//!
//! Threshold selection prefers held-out validation prediction files
//! (written by train); selecting on the test files themselves is allowed
//! but warned about, since it mirrors the leaky published procedure.

use std::path::PathBuf;

use candlekit::market::Class;
use candlekit::models::{ensemble_proba, select_threshold};
use clap::Args;

use crate::artifact::{config_digest, fmt_f64, Artifacts};
use crate::config::{resolve, Globals};
use crate::data::{read_predictions, write_predictions, PredictionFile, PredictionRow};
use crate::error::CliError;

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Exactly three test prediction files (cnn-1, cnn-2, cnn-3).
    #[arg(long = "pred")]
    pub pred: Vec<PathBuf>,
    /// Matching validation prediction files for threshold selection.
    #[arg(long = "val-pred")]
    pub val_pred: Vec<PathBuf>,
    /// Explicit threshold, overriding selection.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub retain: Option<f64>,
    /// Name recorded in the output prediction file.
    #[arg(long)]
    pub name: Option<String>,
}

/// Sort rows by (symbol, date) and require identical keys across files.
fn aligned_probs(files: &mut [PredictionFile]) -> Result<Vec<Vec<[f64; 2]>>, CliError> {
    for f in files.iter_mut() {
        f.rows
            .sort_by(|a, b| a.symbol.cmp(&b.symbol).then(a.date.cmp(&b.date)));
    }
    let keys: Vec<(String, chrono::NaiveDate)> = files[0]
        .rows
        .iter()
        .map(|r| (r.symbol.clone(), r.date))
        .collect();
    for f in files.iter().skip(1) {
        if f.rows.len() != keys.len()
            || f.rows
                .iter()
                .zip(&keys)
                .any(|(r, k)| r.symbol != k.0 || r.date != k.1)
        {
            return Err(CliError::data(format!(
                "prediction files are not aligned: `{}` covers different test points",
                f.model
            )));
        }
    }
    Ok(files
        .iter()
        .map(|f| f.rows.iter().map(|r| r.p).collect())
        .collect())
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let file = &globals.file;
    let pred_paths = if opts.pred.is_empty() {
        file.get("pred")
            .map(|v| v.split(',').map(|s| PathBuf::from(s.trim())).collect())
            .unwrap_or_default()
    } else {
        opts.pred
    };
    if pred_paths.len() != 3 {
        return Err(CliError::usage(format!(
            "the ensemble needs exactly three --pred files, got {}",
            pred_paths.len()
        )));
    }
    let retain = resolve(opts.retain, file, "retain", 0.01)?;
    let name = resolve(opts.name, file, "name", "ensemble".to_string())?;

    let mut parts: Vec<(&str, String)> = pred_paths
        .iter()
        .map(|p| ("pred", p.display().to_string()))
        .collect();
    parts.push(("retain", retain.to_string()));
    parts.push(("name", name.clone()));
    parts.push(("seed", globals.seed.to_string()));
    let art = Artifacts::new(
        &globals.out,
        globals.seed,
        config_digest("ensemble", &parts),
    )?;

    let mut files = pred_paths
        .iter()
        .map(|p| read_predictions(p))
        .collect::<Result<Vec<_>, _>>()?;
    let probs = aligned_probs(&mut files)?;
    let refs: Vec<&[[f64; 2]]> = probs.iter().map(Vec::as_slice).collect();
    let mean = ensemble_proba(&refs)?;

    let alpha = if let Some(a) = opts.alpha {
        a
    } else if !opts.val_pred.is_empty() {
        if opts.val_pred.len() != 3 {
            return Err(CliError::usage(
                "supply exactly three --val-pred files or none",
            ));
        }
        let mut val_files = opts
            .val_pred
            .iter()
            .map(|p| read_predictions(p))
            .collect::<Result<Vec<_>, _>>()?;
        let val_probs = aligned_probs(&mut val_files)?;
        let val_refs: Vec<&[[f64; 2]]> = val_probs.iter().map(Vec::as_slice).collect();
        let val_mean = ensemble_proba(&val_refs)?;
        let conf: Vec<f64> = val_mean.iter().map(|p| p[0].max(p[1])).collect();
        select_threshold(&conf, retain)?.alpha
    } else {
        eprintln!(
            "warning: selecting the ensemble threshold on test confidences; \
             pass --val-pred files for a held-out selection"
        );
        let conf: Vec<f64> = mean.iter().map(|p| p[0].max(p[1])).collect();
        select_threshold(&conf, retain)?.alpha
    };

    let rows: Vec<PredictionRow> = files[0]
        .rows
        .iter()
        .zip(&mean)
        .map(|(key_row, p)| PredictionRow {
            symbol: key_row.symbol.clone(),
            date: key_row.date,
            p: *p,
            decided: p[0].max(p[1]) >= alpha,
            class: if p[1] >= p[0] {
                Class::Positive
            } else {
                Class::Negative
            },
        })
        .collect();
    let decided = rows.iter().filter(|r| r.decided).count();
    write_predictions(
        &art,
        &format!("predictions_{name}.csv"),
        &name,
        Some(alpha),
        &rows,
    )?;
    println!(
        "{name}: averaged {} points, alpha {} decides {}",
        rows.len(),
        fmt_f64(alpha),
        decided
    );
    Ok(())
}
