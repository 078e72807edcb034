//! `eval-patterns`: score all 24 built-in patterns over a panel, extract
//! top-centile matches, and report K-S statistics and conditional
//! next-day return summaries against the unconditional baseline, plus
//! empirical-cdf dumps and a per-match export.

use std::io::Write;
use std::path::PathBuf;

use candlekit::market::compute_returns;
use candlekit::market::csv_io::{load_ohlc_csv, CsvSchema};
use candlekit::matcher::{
    conditional_returns, similarity_series, top_centile_matches, top_centile_matches_per_symbol,
};
use candlekit::patterns::all_builtin_templates;
use candlekit::stats::{ks_two_sample, summarize, BP};
use clap::Args;

use crate::artifact::{config_digest, fmt_f64, slug, Artifacts};
use crate::config::{resolve, resolve_required, Globals};
use crate::error::CliError;

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Canonical panel CSV (from ingest or synth).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Match centile as a fraction of all anchors.
    #[arg(long)]
    pub centile: Option<f64>,
    /// Take the centile within each symbol instead of the pooled panel.
    #[arg(long)]
    pub per_symbol: bool,
}

fn write_cdf(art: &Artifacts, name: &str, sample: &[f64]) -> Result<(), CliError> {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite returns"));
    let n = xs.len() as f64;
    let mut w = art.create_csv(name)?;
    writeln!(w, "return_bp,cdf")?;
    for (i, x) in xs.iter().enumerate() {
        writeln!(w, "{},{}", fmt_f64(x * BP), fmt_f64((i + 1) as f64 / n))?;
    }
    Ok(())
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let file = &globals.file;
    let csv: PathBuf = resolve_required(opts.csv, file, "csv")?;
    let centile = resolve(opts.centile, file, "centile", 0.01f64)?;
    let per_symbol =
        opts.per_symbol || file.get("per-symbol").map(|v| v == "true").unwrap_or(false);
    let digest = config_digest(
        "eval-patterns",
        &[
            ("csv", csv.display().to_string()),
            ("centile", centile.to_string()),
            ("per-symbol", per_symbol.to_string()),
            ("seed", globals.seed.to_string()),
        ],
    );
    let art = Artifacts::new(&globals.out, globals.seed, digest)?;

    let panel = load_ohlc_csv(&csv, &CsvSchema::default())?.panel;
    let returns = compute_returns(&panel);
    let unconditional = returns.pooled();
    if unconditional.is_empty() {
        return Err(CliError::data("panel yields no returns"));
    }
    let base = summarize(&unconditional)?;

    let mut table =
        art.create_csv_with("eval_patterns.csv", &[("centile", centile.to_string())])?;
    writeln!(
        table,
        "pattern,length,direction,matches,dropped,gamma,p_value,mu_bp,mu_dev_bp,sigma_bp"
    )?;
    writeln!(
        table,
        "unconditional,,,{},,,,{},0,{}",
        base.n,
        fmt_f64(base.mean_bp),
        base.std_bp.map(fmt_f64).unwrap_or_default()
    )?;
    write_cdf(&art, "cdf_unconditional.csv", &unconditional)?;

    let mut matches_csv = art.create_csv("matches.csv")?;
    writeln!(matches_csv, "pattern,symbol,date,score,next_return_bp")?;

    for template in all_builtin_templates() {
        let context =
            |e: CliError| CliError::data(format!("pattern {}: {}", template.name(), e.message));
        let series = similarity_series(&panel, &template)
            .map_err(CliError::from)
            .map_err(context)?;
        let set = if per_symbol {
            top_centile_matches_per_symbol(&series, centile)
        } else {
            top_centile_matches(&series, centile)
        }
        .map_err(CliError::from)
        .map_err(context)?;
        if set.underfilled {
            eprintln!(
                "warning: {}: centile {centile} of {} anchors keeps a single best match",
                template.name(),
                series.len()
            );
        }
        let cond = conditional_returns(&set, &returns);
        let values = cond.values();
        let summary = summarize(&values)
            .map_err(CliError::from)
            .map_err(context)?;
        let ks = ks_two_sample(&values, &unconditional)
            .map_err(CliError::from)
            .map_err(context)?;
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{},{}",
            template.name(),
            template.length(),
            template.direction().as_str(),
            values.len(),
            cond.dropped,
            fmt_f64(ks.statistic),
            fmt_f64(ks.p_value),
            fmt_f64(summary.mean_bp),
            fmt_f64(summary.mean_bp - base.mean_bp),
            summary.std_bp.map(fmt_f64).unwrap_or_default()
        )?;
        write_cdf(&art, &format!("cdf_{}.csv", slug(template.name())), &values)?;
        let score_by_key: std::collections::BTreeMap<_, _> = set
            .matches
            .iter()
            .map(|(s, d, score)| ((s.clone(), *d), *score))
            .collect();
        for (symbol, date, ret) in &cond.samples {
            let score = score_by_key[&(symbol.clone(), *date)];
            writeln!(
                matches_csv,
                "{},{},{},{},{}",
                template.name(),
                symbol,
                date,
                fmt_f64(score),
                fmt_f64(ret * BP)
            )?;
        }
    }
    println!(
        "evaluated 24 patterns at centile {centile} -> {}",
        art.path("eval_patterns.csv").display()
    );
    Ok(())
}
