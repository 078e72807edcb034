//! CLI error type carrying the process exit code.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use candlekit::backtest::BacktestError;
use candlekit::market::MarketError;
use candlekit::matcher::MatcherError;
use candlekit::models::ModelError;
use candlekit::nnet::NnetError;
use candlekit::patterns::PatternError;
use candlekit::stats::StatsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Numeric = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Numeric,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(format!("io error: {e}"))
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Parameter(_) => CliError::usage(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<MatcherError> for CliError {
    fn from(e: MatcherError) -> Self {
        match e {
            MatcherError::Parameter(_) => CliError::usage(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<PatternError> for CliError {
    fn from(e: PatternError) -> Self {
        match e {
            PatternError::UnsupportedLength(_) => CliError::usage(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<NnetError> for CliError {
    fn from(e: NnetError) -> Self {
        match e {
            NnetError::Diverged { .. } | NnetError::NonFinite { .. } => {
                CliError::numeric(e.to_string())
            }
            NnetError::Parameter(_) | NnetError::Shape(_) => CliError::usage(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Parameter(_) => CliError::usage(e.to_string()),
            ModelError::Misaligned { .. } => CliError::data(e.to_string()),
            ModelError::Nnet(inner) => inner.into(),
            ModelError::Pattern(inner) => inner.into(),
        }
    }
}

impl From<BacktestError> for CliError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Parameter(_) => CliError::usage(e.to_string()),
            BacktestError::NoTrades => CliError::data(e.to_string()),
            BacktestError::ZeroVariance | BacktestError::TotalLoss(_) => {
                CliError::numeric(e.to_string())
            }
        }
    }
}
