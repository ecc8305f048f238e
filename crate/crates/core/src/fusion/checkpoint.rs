use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{FusionParams, PARAM_NAMES};
use super::{FusionConfig, FusionError};
use crate::tensor_io::{read_tensor, write_tensor};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: FusionConfig,
    pub epoch: usize,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    /// Parameter block name → tensor file, relative to the checkpoint directory.
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

/// Writes `checkpoint.json` plus one tensor file per parameter block into `dir`.
pub fn save_checkpoint(
    dir: &Path,
    params: &FusionParams,
    config: &FusionConfig,
    epoch: usize,
    metrics: BTreeMap<String, f64>,
) -> Result<CheckpointMeta, FusionError> {
    fs::create_dir_all(dir).map_err(|source| FusionError::Io { path: dir.to_path_buf(), source })?;
    let mut files = BTreeMap::new();
    for (name, tensor) in params.to_tensors() {
        let file = format!("{name}.fvt");
        write_tensor(&tensor, dir.join(&file))?;
        files.insert(name.to_string(), file);
    }
    let meta = CheckpointMeta { config: config.clone(), epoch, metrics, params: files };
    let path = dir.join(CHECKPOINT_FILE);
    let mut json = serde_json::to_string_pretty(&meta).map_err(|e| FusionError::Header(e.to_string()))?;
    json.push('\n');
    fs::write(&path, json).map_err(|source| FusionError::Io { path, source })?;
    Ok(meta)
}

pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointMeta, FusionParams), FusionError> {
    let path = dir.join(CHECKPOINT_FILE);
    let text = fs::read_to_string(&path).map_err(|source| FusionError::Io { path: path.clone(), source })?;
    let meta: CheckpointMeta =
        serde_json::from_str(&text).map_err(|e| FusionError::Header(format!("{}: {e}", path.display())))?;
    meta.config.validate()?;
    let params = FusionParams::from_tensors(meta.config.token_dim, meta.config.fused_dim, |name| {
        debug_assert!(PARAM_NAMES.contains(&name));
        let file = meta.params.get(name).cloned().unwrap_or_else(|| format!("{name}.fvt"));
        Ok(read_tensor(dir.join(file))?)
    })?;
    Ok((meta, params))
}
