//! Weight checkpoints: a `manifest.json` naming each tensor, plus one `SRT1`
//! file per tensor. Each entry carries the SHA-256 of its file so that any
//! byte-level corruption is caught on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blocks::{BlockCase, BlockWeights};
use crate::error::{Error, Result};
use crate::format;
use crate::tensor::Tensor;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: BlockCase,
    pub weights: Vec<TensorEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `<dir>/<name>.srt` and returns its manifest entry.
pub fn write_entry(dir: &Path, name: &str, t: &Tensor) -> Result<TensorEntry> {
    let file = format!("{name}.srt");
    let bytes = format::to_bytes(t);
    fs::write(dir.join(&file), &bytes)?;
    Ok(TensorEntry {
        name: name.to_string(),
        file,
        shape: t.shape().to_vec(),
        sha256: sha256_hex(&bytes),
    })
}

/// Reads an entry back, rejecting checksum or shape mismatches.
pub fn read_entry(dir: &Path, entry: &TensorEntry) -> Result<Tensor> {
    let bytes = fs::read(dir.join(&entry.file))?;
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(Error::Checksum {
            name: entry.name.clone(),
        });
    }
    let t: Tensor = format::from_bytes(&bytes)?;
    if t.shape() != entry.shape.as_slice() {
        return Err(Error::dim("checkpoint entry", &entry.shape, t.shape()));
    }
    Ok(t)
}

pub fn save(dir: &Path, case: &BlockCase, weights: &BlockWeights) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let entries = weights
        .named()
        .into_iter()
        .map(|(name, t)| write_entry(dir, name, t))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        config: *case,
        weights: entries,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<(BlockCase, BlockWeights)> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
    let tensors = manifest
        .weights
        .iter()
        .map(|e| read_entry(dir, e))
        .collect::<Result<Vec<_>>>()?;
    let weights = BlockWeights::from_ordered(&manifest.config, tensors)?;
    let expected: Vec<_> = weights.named().into_iter().map(|(n, _)| n).collect();
    let found: Vec<_> = manifest.weights.iter().map(|e| e.name.as_str()).collect();
    if expected != found {
        return Err(Error::Config(format!(
            "manifest names {found:?} do not match {expected:?}"
        )));
    }
    Ok((manifest.config, weights))
}
