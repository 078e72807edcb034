//! `significance`: AUC, Mann-Whitney Z and significance for prediction
//! files, over all test points and over each file's decided subset.

use std::io::Write;
use std::path::PathBuf;

use candlekit::market::Class;
use candlekit::stats::{mww_auc, StatsError};
use chrono::NaiveDate;
use clap::Args;

use crate::artifact::{config_digest, fmt_f64, Artifacts};
use crate::config::{resolve_required, Globals};
use crate::data::{build_pipeline, join_labels, read_predictions, test_label_index, SplitOpts};
use crate::error::CliError;

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Prediction files to score (repeatable).
    #[arg(long = "pred")]
    pub pred: Vec<PathBuf>,
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
}

fn write_row(
    w: &mut impl Write,
    model: &str,
    subset: &str,
    scores: &[f64],
    labels: &[Class],
) -> Result<(), CliError> {
    match mww_auc(scores, labels) {
        Ok(r) => {
            writeln!(
                w,
                "{model},{subset},{},{},{},{},{},{},{}",
                scores.len(),
                r.n_pos,
                r.n_neg,
                fmt_f64(r.auc * 100.0),
                fmt_f64(r.u),
                fmt_f64(r.z),
                r.significance.map(fmt_f64).unwrap_or_default()
            )?;
        }
        Err(StatsError::SingleClass) => {
            eprintln!("warning: {model} ({subset}): one class only; significance skipped");
            writeln!(w, "{model},{subset},{},,,,,,", scores.len())?;
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let file = &globals.file;
    if opts.pred.is_empty() {
        return Err(CliError::usage("pass at least one --pred file"));
    }
    let csv: PathBuf = resolve_required(opts.csv, file, "csv")?;
    let split = SplitOpts::resolve(
        file,
        opts.train_start,
        opts.train_end,
        opts.test_start,
        opts.test_end,
        opts.window_len,
    )?;
    let mut parts: Vec<(&str, String)> = opts
        .pred
        .iter()
        .map(|p| ("pred", p.display().to_string()))
        .collect();
    parts.push(("csv", csv.display().to_string()));
    parts.push(("seed", globals.seed.to_string()));
    parts.extend(split.digest_parts());
    let art = Artifacts::new(
        &globals.out,
        globals.seed,
        config_digest("significance", &parts),
    )?;

    let pipeline = build_pipeline(&csv, &split, globals.seed)?;
    let index = test_label_index(&pipeline.windows);

    let mut w = art.create_csv("significance.csv")?;
    writeln!(w, "model,subset,n,n_pos,n_neg,auc_pct,u,z,significance")?;
    for path in &opts.pred {
        let pred = read_predictions(path)?;
        let labels = join_labels(&pred, &index)?;
        let scores: Vec<f64> = pred.rows.iter().map(|r| r.p[1]).collect();
        write_row(&mut w, &pred.model, "all", &scores, &labels)?;

        let decided: Vec<(f64, Class)> = pred
            .rows
            .iter()
            .zip(&labels)
            .filter(|(r, _)| r.decided)
            .map(|(r, l)| (r.p[1], *l))
            .collect();
        let d_scores: Vec<f64> = decided.iter().map(|(s, _)| *s).collect();
        let d_labels: Vec<Class> = decided.iter().map(|(_, l)| *l).collect();
        if d_scores.is_empty() {
            eprintln!("warning: {}: no decided points", pred.model);
            writeln!(w, "{},thresholded,0,,,,,,", pred.model)?;
        } else {
            write_row(&mut w, &pred.model, "thresholded", &d_scores, &d_labels)?;
        }
    }
    println!(
        "significance for {} model(s) -> {}",
        opts.pred.len(),
        art.path("significance.csv").display()
    );
    Ok(())
}
