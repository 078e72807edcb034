//! Versioned flat model files: layer specs, parameters and training
//! metadata as a single JSON document. Loads reject version mismatches.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerSpec, Network, NnetError};

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub input_dim: usize,
    pub seed: u64,
    pub specs: Vec<LayerSpec>,
    /// Flat training metadata: seed, config digest, data digest, kind.
    pub metadata: BTreeMap<String, String>,
    pub params: Vec<f64>,
}

/// Serialize a network with its metadata. Output is deterministic: struct
/// field order is fixed and the metadata map is sorted.
pub fn save_model(
    net: &Network,
    metadata: BTreeMap<String, String>,
    path: &Path,
) -> Result<(), NnetError> {
    let file = ModelFile {
        version: MODEL_FILE_VERSION,
        input_dim: net.input_dim(),
        seed: net.seed(),
        specs: net.specs().to_vec(),
        metadata,
        params: net.params_flat(),
    };
    let json =
        serde_json::to_string_pretty(&file).map_err(|e| NnetError::ModelFile(e.to_string()))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Load a model file, rejecting mismatched versions.
pub fn load_model(path: &Path) -> Result<(Network, BTreeMap<String, String>), NnetError> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| NnetError::ModelFile(e.to_string()))?;
    if file.version != MODEL_FILE_VERSION {
        return Err(NnetError::ModelFile(format!(
            "unsupported model file version {} (expected {MODEL_FILE_VERSION})",
            file.version
        )));
    }
    let mut net = Network::new(file.input_dim, file.specs, file.seed)?;
    net.set_params_flat(&file.params)?;
    Ok((net, file.metadata))
}
