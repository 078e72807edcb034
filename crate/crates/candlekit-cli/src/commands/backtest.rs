//! `backtest`: turn each prediction file's decided points into a daily
//! trading simulation at several friction costs, exporting a summary
//! table plus equity and activity series per model.

use std::io::Write;
use std::path::PathBuf;

use candlekit::backtest::{
    activity_series, breakeven_cost, cagr, sharpe, simulate, BacktestError, Decision,
};
use chrono::NaiveDate;
use clap::Args;

use crate::artifact::{config_digest, fmt_f64, Artifacts};
use crate::config::{resolve, resolve_opt, resolve_required, Globals};
use crate::data::{build_pipeline, read_predictions, SplitOpts};
use crate::error::CliError;

/// Trading days per year used for Sharpe annualization.
const PERIODS_PER_YEAR: usize = 252;

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Prediction files to trade (repeatable).
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
    /// Comma-separated per-transaction costs as fractions.
    #[arg(long)]
    pub costs: Option<String>,
    /// Years spanned by the test calendar; derived from the test range
    /// when omitted.
    #[arg(long)]
    pub years: Option<f64>,
}

fn parse_costs(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CliError::usage(format!("bad cost `{s}`: {e}")))
        })
        .collect()
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
    let costs_raw = resolve(opts.costs, file, "costs", "0,0.001,0.0025".to_string())?;
    let costs = parse_costs(&costs_raw)?;
    if costs.is_empty() {
        return Err(CliError::usage("no costs given"));
    }
    let years = match resolve_opt(opts.years, file, "years")? {
        Some(y) => y,
        None => split.test_years(),
    };

    let mut parts: Vec<(&str, String)> = opts
        .pred
        .iter()
        .map(|p| ("pred", p.display().to_string()))
        .collect();
    parts.push(("csv", csv.display().to_string()));
    parts.push(("costs", costs_raw.clone()));
    parts.push(("years", years.to_string()));
    parts.push(("seed", globals.seed.to_string()));
    parts.extend(split.digest_parts());
    let art = Artifacts::new(
        &globals.out,
        globals.seed,
        config_digest("backtest", &parts),
    )?;

    let pipeline = build_pipeline(&csv, &split, globals.seed)?;

    let mut summary = art.create_csv_with("backtest_summary.csv", &[("years", fmt_f64(years))])?;
    writeln!(
        summary,
        "model,cost,trades,dropped,profit,cagr_pct,sharpe,max_drawdown,breakeven_cost"
    )?;

    for path in &opts.pred {
        let pred = read_predictions(path)?;
        let decisions: Vec<Decision> = pred
            .rows
            .iter()
            .filter(|r| r.decided)
            .map(|r| Decision {
                symbol: r.symbol.clone(),
                date: r.date,
                class: r.class,
                confidence: r.p[0].max(r.p[1]),
            })
            .collect();
        if decisions.is_empty() {
            eprintln!(
                "warning: {}: empty decision set, zero-profit report",
                pred.model
            );
            for cost in &costs {
                writeln!(summary, "{},{},0,0,0,0,,0,", pred.model, fmt_f64(*cost))?;
            }
            continue;
        }
        for (i, cost) in costs.iter().enumerate() {
            let (log, report) = simulate(&decisions, &pipeline.returns, *cost)?;
            let growth = match cagr(report.cumulative_profit, years) {
                Ok(v) => fmt_f64(v),
                Err(BacktestError::TotalLoss(_)) => {
                    eprintln!(
                        "warning: {}: profit below -1 at cost {cost}; growth rate undefined",
                        pred.model
                    );
                    String::new()
                }
                Err(e) => return Err(e.into()),
            };
            let daily: Vec<f64> = report.daily_pnl.iter().map(|(_, p)| *p).collect();
            let sharpe_cell = match sharpe(&daily, PERIODS_PER_YEAR) {
                Ok(v) => fmt_f64(v),
                Err(BacktestError::ZeroVariance) | Err(BacktestError::Parameter(_)) => {
                    eprintln!("warning: {}: sharpe undefined at cost {cost}", pred.model);
                    String::new()
                }
                Err(e) => return Err(e.into()),
            };
            writeln!(
                summary,
                "{},{},{},{},{},{},{},{},{}",
                pred.model,
                fmt_f64(*cost),
                report.trades,
                report.dropped,
                fmt_f64(report.cumulative_profit),
                growth,
                sharpe_cell,
                fmt_f64(report.max_drawdown),
                fmt_f64(breakeven_cost(&report)?)
            )?;

            let mut equity = art.create_csv_with(
                &format!("equity_{}_{:.4}.csv", pred.model, cost),
                &[("model", pred.model.clone()), ("cost", fmt_f64(*cost))],
            )?;
            writeln!(equity, "date,daily_pnl,cumulative_profit")?;
            let mut cum = 0.0;
            for (date, pnl) in &report.daily_pnl {
                cum += pnl;
                writeln!(equity, "{date},{},{}", fmt_f64(*pnl), fmt_f64(cum))?;
            }

            if i == 0 {
                let mut activity = art.create_csv_with(
                    &format!("activity_{}.csv", pred.model),
                    &[("model", pred.model.clone())],
                )?;
                writeln!(activity, "date,buys,sells")?;
                for (date, buys, sells) in activity_series(&log) {
                    writeln!(activity, "{date},{buys},{sells}")?;
                }
            }
        }
        println!(
            "{}: {} decided trades over {} costs",
            pred.model,
            decisions.len(),
            costs.len()
        );
    }
    println!("summary -> {}", art.path("backtest_summary.csv").display());
    Ok(())
}
