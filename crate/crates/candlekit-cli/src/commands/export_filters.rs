//! `export-filters`: render the convolution filters of a saved model as
//! Hinton diagrams, candlestick translations and a plain-text dump.

use std::path::PathBuf;

use candlekit::nnet::load_model;
use clap::Args;

use crate::artifact::{config_digest, Artifacts};
use crate::config::{resolve_required, Globals};
use crate::error::CliError;
use crate::svg::{candles_svg, filters_text, hinton_svg};

#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Saved model file (model_<kind>.json from train).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn run(opts: Opts, globals: &Globals) -> Result<(), CliError> {
    let model_path: PathBuf = resolve_required(opts.model, &globals.file, "model")?;
    let digest = config_digest(
        "export-filters",
        &[("model", model_path.display().to_string())],
    );
    let art = Artifacts::new(&globals.out, globals.seed, digest)?;

    let (net, metadata) = load_model(&model_path)?;
    let kind = metadata
        .get("kind")
        .cloned()
        .unwrap_or_else(|| "model".to_string());
    let Some((filters, width)) = net.conv_filters() else {
        return Err(CliError::data(format!(
            "model `{kind}` has no convolution layer to export"
        )));
    };

    let hinton = art.write_svg(
        &format!("filters_{kind}_hinton.svg"),
        &hinton_svg(&filters, width),
    )?;
    let candles = art.write_svg(
        &format!("filters_{kind}_candles.svg"),
        &candles_svg(&filters, width),
    )?;
    art.write_text(
        &format!("filters_{kind}.txt"),
        &filters_text(&filters, width),
    )?;
    println!(
        "exported {} filters of width {width} -> {}, {}",
        filters.len(),
        hinton.display(),
        candles.display()
    );
    Ok(())
}
