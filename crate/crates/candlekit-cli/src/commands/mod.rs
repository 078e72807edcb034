pub mod backtest;
pub mod ensemble;
pub mod eval_patterns;
pub mod export_filters;
pub mod ingest;
pub mod significance;
pub mod sweep;
pub mod synth;
pub mod train;
