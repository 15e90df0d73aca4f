//! Binary checkpoint container.
//!
//! Layout:
//!
//! ```text
//! "cae-rl/ckpt/1\n"
//! u64 little-endian: manifest length in bytes
//! manifest (JSON): { "meta": …, "tensors": [{ "name", "shape", "offset" }], "data_bytes" }
//! raw little-endian f64 payload; `offset` is relative to the payload start
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::NetworkParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_TAG: &str = "cae-rl/ckpt/1";

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    meta: serde_json::Value,
    tensors: Vec<Entry>,
    data_bytes: usize,
}

pub fn encode(meta: &serde_json::Value, params: &NetworkParams) -> Result<Vec<u8>> {
    let mut tensors = Vec::with_capacity(params.len());
    let mut payload = Vec::new();
    for (name, t) in params.iter() {
        tensors.push(Entry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: payload.len(),
        });
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest {
        meta: meta.clone(),
        tensors,
        data_bytes: payload.len(),
    };
    let manifest = serde_json::to_vec(&manifest).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(CHECKPOINT_TAG.len() + 9 + manifest.len() + payload.len());
    out.extend_from_slice(CHECKPOINT_TAG.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(serde_json::Value, NetworkParams)> {
    let header = CHECKPOINT_TAG.len() + 1;
    if bytes.len() < header + 8 || &bytes[..header - 1] != CHECKPOINT_TAG.as_bytes() {
        return Err(Error::Checkpoint(format!("missing `{CHECKPOINT_TAG}` tag")));
    }
    let len_bytes: [u8; 8] = bytes[header..header + 8].try_into().expect("8 bytes");
    let manifest_len = u64::from_le_bytes(len_bytes) as usize;
    let start = header + 8;
    let manifest_end = start
        .checked_add(manifest_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[start..manifest_end])
        .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    let payload = &bytes[manifest_end..];
    if payload.len() != manifest.data_bytes {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, manifest declares {}",
            payload.len(),
            manifest.data_bytes
        )));
    }
    let mut params = NetworkParams::new();
    for e in manifest.tensors {
        let count: usize = e.shape.iter().product();
        let end = e.offset + 8 * count;
        if end > payload.len() {
            return Err(Error::Checkpoint(format!("tensor `{}` overruns payload", e.name)));
        }
        let data = payload[e.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.insert(e.name, Tensor::new(e.shape, data)?)?;
    }
    Ok((manifest.meta, params))
}

pub fn save(path: &Path, meta: &serde_json::Value, params: &NetworkParams) -> Result<()> {
    std::fs::write(path, encode(meta, params)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(serde_json::Value, NetworkParams)> {
    decode(&std::fs::read(path)?)
}
