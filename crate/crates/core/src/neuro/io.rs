//! Weights as a JSON manifest plus a little-endian `f64` payload.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::scalar::{lit, to_f64};
use crate::volio::write_atomic;
use crate::{Error, Real, Result};

pub const WEIGHTS_FORMAT: &str = "renalscan-weights/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Element offset into the payload.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub format: String,
    pub model: String,
    pub seed: u64,
    /// Payload file name, relative to the manifest.
    pub payload: String,
    pub tensors: Vec<TensorEntry>,
}

fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `<path>` (manifest) and `<path>.bin` with the extension replaced.
pub fn save_weights<T: Real>(
    path: impl AsRef<Path>,
    model: &str,
    seed: u64,
    tensors: &[(String, &Tensor<T>)],
) -> Result<()> {
    let path = path.as_ref();
    let bin = payload_path(path);
    let mut bytes = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0;
    for (name, t) in tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape.clone(),
            offset,
        });
        for &v in &t.values {
            bytes.extend_from_slice(&to_f64(v).to_le_bytes());
        }
        offset += t.len();
    }
    let manifest = WeightManifest {
        format: WEIGHTS_FORMAT.into(),
        model: model.into(),
        seed,
        payload: bin
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string(),
        tensors: entries,
    };
    write_atomic(&bin, &bytes)?;
    write_atomic(path, serde_json::to_string_pretty(&manifest)?.as_bytes())
}

/// Reads weights back in manifest order.
pub fn load_weights<T: Real>(
    path: impl AsRef<Path>,
) -> Result<(WeightManifest, Vec<(String, Tensor<T>)>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: WeightManifest = serde_json::from_str(&text)?;
    if manifest.format != WEIGHTS_FORMAT {
        return Err(Error::Format(format!(
            "unknown weight format {:?}",
            manifest.format
        )));
    }
    let bin = path.with_file_name(&manifest.payload);
    let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let total: usize = manifest
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>())
        .sum();
    if bytes.len() != total * 8 {
        return Err(Error::PayloadLength {
            expected: total * 8,
            found: bytes.len(),
        });
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let tensors = manifest
        .tensors
        .iter()
        .map(|e| {
            let n: usize = e.shape.iter().product();
            let slice = vals
                .get(e.offset..e.offset + n)
                .ok_or_else(|| Error::Format(format!("tensor {} exceeds payload", e.name)))?;
            Ok((
                e.name.clone(),
                Tensor::from_vec(&e.shape, slice.iter().map(|&v| lit(v)).collect())?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, tensors))
}
