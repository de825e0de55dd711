//! Checkpoint directories: `manifest.json`, `vocab.json` and an opaque
//! `weights.safetensors` blob.

use std::path::Path;

use candle_nn::VarMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Vocab;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const VOCAB_FILE: &str = "vocab.json";
pub const WEIGHTS_FILE: &str = "weights.safetensors";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    /// `ranker` or `generator`.
    pub kind: String,
    pub config: serde_json::Value,
    pub vocab_hash: String,
    pub seed: u64,
    pub epochs_trained: usize,
    pub version: String,
}

pub fn save(dir: &Path, manifest: &CheckpointManifest, varmap: &VarMap, vocab: &Vocab) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(MANIFEST_FILE), manifest)?;
    write_json(&dir.join(VOCAB_FILE), vocab)?;
    varmap.save(dir.join(WEIGHTS_FILE))?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST_FILE);
    let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&raw)?)
}

/// Reads the manifest and vocabulary, checking kind and vocabulary hash.
pub fn open(dir: &Path, kind: &str) -> Result<(CheckpointManifest, Vocab)> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != kind {
        return Err(Error::Model(format!(
            "{} holds a {} checkpoint, expected {kind}",
            dir.display(),
            manifest.kind
        )));
    }
    let path = dir.join(VOCAB_FILE);
    let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let vocab: Vocab = serde_json::from_str(&raw)?;
    if vocab.fingerprint() != manifest.vocab_hash {
        return Err(Error::Model(format!(
            "{}: vocabulary does not match the manifest hash",
            dir.display()
        )));
    }
    Ok((manifest, vocab))
}

pub fn load_weights(dir: &Path, varmap: &mut VarMap) -> Result<()> {
    let path = dir.join(WEIGHTS_FILE);
    if !path.exists() {
        return Err(Error::Model(format!("{} is missing", path.display())));
    }
    varmap.load(&path)?;
    Ok(())
}

pub fn version() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}
