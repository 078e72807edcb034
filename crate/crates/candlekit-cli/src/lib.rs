//! Command implementations behind the `candlekit` binary.
//!
//! Every command reads a panel CSV (or writes one), works through the
//! candlekit library, and emits CSV/SVG artifacts that all start with the
//! same metadata header (tool version, seed, config digest). Identical
//! configurations produce byte-identical artifacts.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod svg;

pub use error::{CliError, ExitKind};

/// Version string stamped into every artifact header.
pub const TOOL_VERSION: &str = concat!("candlekit v", env!("CARGO_PKG_VERSION"));
