//! Saving and loading model checkpoints.

use std::path::Path;

use lmfca_core::checkpoint::{decode, encode};
use lmfca_core::net::{declare_params, ModelConfig};
use lmfca_core::optim::TrainState;
use lmfca_core::ParameterStore;

use crate::error::{Result, ToolkitError};

/// A checkpoint checked against the parameter layout its config declares.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub cfg: ModelConfig,
    pub params: ParameterStore<f32>,
    pub state: Option<TrainState<f32>>,
}

pub fn save_checkpoint(
    path: &Path,
    cfg: &ModelConfig,
    params: &ParameterStore<f32>,
    state: Option<&TrainState<f32>>,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let bytes = encode(&cfg.to_text(), params, state);
    // Write then rename so an interrupted save never leaves a torn file.
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedModel> {
    let bytes = std::fs::read(path)?;
    let ck = decode(&bytes).map_err(|e| ToolkitError::Format(format!("{}: {e}", path.display())))?;
    let cfg = ModelConfig::from_text(&ck.header)?;
    let decls = declare_params(&cfg)?;
    let mismatch = |msg: String| ToolkitError::Format(format!("{}: checkpoint/config mismatch: {msg}", path.display()));
    if decls.len() != ck.params.len() {
        return Err(mismatch(format!(
            "config declares {} tensors, checkpoint holds {}",
            decls.len(),
            ck.params.len()
        )));
    }
    for (name, shape, _) in &decls {
        let t = ck.params.get(name).map_err(|_| mismatch(format!("missing `{name}`")))?;
        if t.shape() != shape.as_slice() {
            return Err(mismatch(format!("`{name}` has shape {:?}, expected {shape:?}", t.shape())));
        }
    }
    if let Some(s) = &ck.state {
        if s.m.len() != decls.len() || s.v.len() != decls.len() {
            return Err(mismatch("optimizer moments do not cover every parameter".into()));
        }
    }
    Ok(LoadedModel {
        cfg,
        params: ck.params,
        state: ck.state,
    })
}
