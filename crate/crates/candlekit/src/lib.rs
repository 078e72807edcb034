//! Candlestick pattern evaluation and thresholded convolutional ensembles
//! for next-day return classification.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`market`]: OHLC panels, returns, noisy binary labels, standardized
//!   rolling windows, and a synthetic panel generator.
//! - [`patterns`]: the 24 built-in chartist templates as standardized
//!   4 x m matrices.
//! - [`matcher`]: normalized cross-correlation scores, top-centile match
//!   extraction, and conditional return samples.
//! - [`stats`]: two-sample Kolmogorov-Smirnov test, distribution
//!   summaries with boxplot notches, and Mann-Whitney/AUC significance.
//! - [`nnet`]: a minimal differentiable-layer engine (dense, causal 4 x m
//!   convolution, ReLU, inverted dropout, softmax cross-entropy) with
//!   seeded deterministic training.
//! - [`models`]: the classifier zoo (MLP, technically-filtered MLP,
//!   1/2/3-day CNNs), confidence thresholding, the heterogeneous
//!   ensemble, and a k-NN baseline.
//! - [`backtest`]: friction-aware daily trading simulation with profit,
//!   CAGR, Sharpe, drawdown and activity series.
//!
//! All randomness is seeded and all containers iterate in a stable order,
//! so identical inputs reproduce identical outputs bit for bit.

pub mod backtest;
pub mod market;
pub mod matcher;
pub mod models;
pub mod nnet;
pub mod num;
pub mod patterns;
pub mod stats;
