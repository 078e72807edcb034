//! Friction-aware daily trading simulation.
//!
//! Every decided test point becomes one trade of a single unit of starting
//! wealth held for one day: long trades add the next-day return, short
//! trades subtract it, and each trade is charged the friction cost once at
//! entry. Profit accumulates additively (no compounding), which makes
//! profit at cost c exactly profit at cost zero minus c times the trade
//! count.

use chrono::NaiveDate;
use thiserror::Error;

use crate::market::{Class, ReturnSeries};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("no trades in the log")]
    NoTrades,
    #[error("zero variance in the pnl series")]
    ZeroVariance,
    #[error("profit {0} at or below -1; growth rate undefined")]
    TotalLoss(f64),
}

/// One decided test point to be traded.
#[derive(Clone, Debug)]
pub struct Decision {
    pub symbol: String,
    pub date: NaiveDate,
    pub class: Class,
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TradeDirection {
    Long,
    Short,
}

/// One executed trade of unit notional.
#[derive(Clone, Debug)]
pub struct Trade {
    pub symbol: String,
    pub date: NaiveDate,
    pub direction: TradeDirection,
    /// Realized next-day simple return of the underlying.
    pub next_return: f64,
    /// Friction cost charged once, as a fraction of unit notional.
    pub cost: f64,
}

impl Trade {
    pub fn pnl(&self) -> f64 {
        let signed = match self.direction {
            TradeDirection::Long => self.next_return,
            TradeDirection::Short => -self.next_return,
        };
        signed - self.cost
    }
}

/// Daily decision log plus the trading calendar it spans.
#[derive(Clone, Debug, Default)]
pub struct TradeLog {
    pub trades: Vec<Trade>,
    /// Every trading day in the simulated span, including inactive ones.
    pub calendar: Vec<NaiveDate>,
    /// Decisions dropped for lacking a next-day return.
    pub dropped: usize,
}

/// Aggregate simulation results at one cost level.
#[derive(Clone, Debug)]
pub struct BacktestReport {
    pub cost: f64,
    pub trades: usize,
    /// Sum of per-trade pnl, in units of starting wealth.
    pub cumulative_profit: f64,
    /// Pnl per calendar day (zeros on inactive days), by decision date.
    pub daily_pnl: Vec<(NaiveDate, f64)>,
    /// Largest peak-to-trough decline of the cumulative curve.
    pub max_drawdown: f64,
    pub dropped: usize,
}

/// Simulate the decision set at one friction cost.
///
/// Decisions without a next-day return are dropped and counted. The
/// calendar covers every return date (across symbols) within the decision
/// span, so daily series align across models.
pub fn simulate(
    decisions: &[Decision],
    returns: &ReturnSeries,
    cost: f64,
) -> Result<(TradeLog, BacktestReport), BacktestError> {
    if cost < 0.0 || !cost.is_finite() {
        return Err(BacktestError::Parameter(format!(
            "cost must be a nonnegative fraction, got {cost}"
        )));
    }
    let mut trades = Vec::with_capacity(decisions.len());
    let mut dropped = 0usize;
    for d in decisions {
        match returns.next_after(&d.symbol, d.date) {
            Some((_, ret)) => trades.push(Trade {
                symbol: d.symbol.clone(),
                date: d.date,
                direction: match d.class {
                    Class::Positive => TradeDirection::Long,
                    Class::Negative => TradeDirection::Short,
                },
                next_return: ret,
                cost,
            }),
            None => dropped += 1,
        }
    }

    let calendar: Vec<NaiveDate> = if trades.is_empty() {
        Vec::new()
    } else {
        let first = trades.iter().map(|t| t.date).min().unwrap();
        let last = trades.iter().map(|t| t.date).max().unwrap();
        let mut days: Vec<NaiveDate> = returns
            .iter()
            .flat_map(|(_, r)| r.iter().map(|(d, _)| *d))
            .filter(|d| *d >= first && *d <= last)
            .collect();
        days.sort();
        days.dedup();
        days
    };

    let mut daily_pnl: Vec<(NaiveDate, f64)> = calendar.iter().map(|d| (*d, 0.0)).collect();
    for t in &trades {
        if let Ok(i) = daily_pnl.binary_search_by_key(&t.date, |(d, _)| *d) {
            daily_pnl[i].1 += t.pnl();
        }
    }
    let cumulative_profit: f64 = trades.iter().map(Trade::pnl).sum();
    let curve: Vec<f64> = daily_pnl
        .iter()
        .scan(0.0, |acc, (_, p)| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let max_drawdown = max_drawdown(&curve);

    let log = TradeLog {
        trades,
        calendar,
        dropped,
    };
    let report = BacktestReport {
        cost,
        trades: log.trades.len(),
        cumulative_profit,
        daily_pnl,
        max_drawdown,
        dropped,
    };
    Ok((log, report))
}

/// Largest decline from a running peak of a cumulative curve.
pub fn max_drawdown(cumulative: &[f64]) -> f64 {
    let mut peak = 0.0f64;
    let mut worst = 0.0f64;
    for &c in cumulative {
        peak = peak.max(c);
        worst = worst.max(peak - c);
    }
    worst
}

/// Compound annual growth rate in percent for a total profit expressed as
/// a multiple of starting wealth.
pub fn cagr(profit: f64, years: f64) -> Result<f64, BacktestError> {
    if years <= 0.0 || !years.is_finite() {
        return Err(BacktestError::Parameter(format!(
            "years must be positive, got {years}"
        )));
    }
    if profit <= -1.0 {
        return Err(BacktestError::TotalLoss(profit));
    }
    Ok(((1.0 + profit).powf(1.0 / years) - 1.0) * 100.0)
}

/// Annualized Sharpe ratio of a daily pnl series at zero risk-free rate,
/// using the sample (n-1) standard deviation.
pub fn sharpe(daily_pnl: &[f64], periods_per_year: usize) -> Result<f64, BacktestError> {
    if daily_pnl.len() < 2 {
        return Err(BacktestError::Parameter(
            "sharpe needs at least two observations".into(),
        ));
    }
    if daily_pnl.iter().all(|&x| x == daily_pnl[0]) {
        return Err(BacktestError::ZeroVariance);
    }
    let n = daily_pnl.len() as f64;
    let mean = daily_pnl.iter().sum::<f64>() / n;
    let ss = daily_pnl
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>();
    let std = (ss / (n - 1.0)).sqrt();
    Ok(mean / std * (periods_per_year as f64).sqrt())
}

/// Friction cost at which cumulative profit reaches zero.
///
/// The report may carry any cost level; its friction is undone through the
/// exact linear cost model before dividing by the trade count.
pub fn breakeven_cost(report: &BacktestReport) -> Result<f64, BacktestError> {
    if report.trades == 0 {
        return Err(BacktestError::NoTrades);
    }
    let frictionless = report.cumulative_profit + report.cost * report.trades as f64;
    Ok(frictionless / report.trades as f64)
}

/// Daily (buys, sells) counts over the full calendar, zeros included.
pub fn activity_series(log: &TradeLog) -> Vec<(NaiveDate, usize, usize)> {
    let mut out: Vec<(NaiveDate, usize, usize)> = log.calendar.iter().map(|d| (*d, 0, 0)).collect();
    for t in &log.trades {
        if let Ok(i) = out.binary_search_by_key(&t.date, |(d, _, _)| *d) {
            match t.direction {
                TradeDirection::Long => out[i].1 += 1,
                TradeDirection::Short => out[i].2 += 1,
            }
        }
    }
    out
}
