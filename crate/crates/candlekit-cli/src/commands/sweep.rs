//! `sweep`: regenerate the confidence-threshold sweep for an existing
//! prediction file, joining it back to ground-truth labels derived from
//! the panel, split and seed.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::Args;

use candlekit::models::select_threshold;

use crate::artifact::{config_digest, fmt_f64, Artifacts};
use crate::config::{resolve, resolve_required, Globals};
use crate::data::{build_pipeline, join_labels, read_predictions, test_label_index, SplitOpts};
use crate::error::CliError;

use super::train::write_sweep_csv;

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Prediction CSV produced by train or ensemble.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Canonical panel CSV the predictions were computed from.
    #[arg(long)]
    pub csv: Option<PathBuf>,
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
    #[arg(long)]
    pub retain: Option<f64>,
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let file = &globals.file;
    let pred_path: PathBuf = resolve_required(opts.pred, file, "pred")?;
    let csv: PathBuf = resolve_required(opts.csv, file, "csv")?;
    let retain = resolve(opts.retain, file, "retain", 0.01)?;
    let split = SplitOpts::resolve(
        file,
        opts.train_start,
        opts.train_end,
        opts.test_start,
        opts.test_end,
        opts.window_len,
    )?;
    let mut parts = vec![
        ("pred", pred_path.display().to_string()),
        ("csv", csv.display().to_string()),
        ("retain", retain.to_string()),
        ("seed", globals.seed.to_string()),
    ];
    parts.extend(split.digest_parts());
    let art = Artifacts::new(&globals.out, globals.seed, config_digest("sweep", &parts))?;

    let pred = read_predictions(&pred_path)?;
    let pipeline = build_pipeline(&csv, &split, globals.seed)?;
    let labels = join_labels(&pred, &test_label_index(&pipeline.windows))?;
    let probs: Vec<[f64; 2]> = pred.rows.iter().map(|r| r.p).collect();

    let conf: Vec<f64> = probs.iter().map(|p| p[0].max(p[1])).collect();
    let selection = select_threshold(&conf, retain)?;
    write_sweep_csv(
        &art,
        &format!("sweep_{}.csv", pred.model),
        &probs,
        &labels,
        &[
            ("model", pred.model.clone()),
            ("retain", retain.to_string()),
            ("selected-alpha", fmt_f64(selection.alpha)),
            ("achieved-retention", fmt_f64(selection.achieved_retention)),
        ],
    )?;
    println!(
        "{}: alpha {} retains {} of {} points ({:.4})",
        pred.model,
        fmt_f64(selection.alpha),
        selection.retained,
        probs.len(),
        selection.achieved_retention
    );
    Ok(())
}
