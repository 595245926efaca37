//! Binary parameter container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes        | content                                             |
//! |--------------|-----------------------------------------------------|
//! | 0..8         | magic `GETPARAM`                                    |
//! | 8..12        | format version, `u32` (currently 1)                 |
//! | 12..20       | index length `L` in bytes, `u64`                    |
//! | 20..20+L     | UTF-8 JSON index                                    |
//! | 20+L..       | payload: every tensor's `f64` values, concatenated  |
//!
//! The index is `{"meta": <any JSON>, "tensors": [{"name", "shape",
//! "offset", "len"}]}` where `offset` and `len` count `f64` elements from
//! the start of the payload. Tensors appear in store order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"GETPARAM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Index {
    meta: serde_json::Value,
    tensors: Vec<IndexEntry>,
}

pub fn write_params<W: Write>(mut w: W, store: &ParamStore, meta: &serde_json::Value) -> Result<()> {
    let mut offset = 0;
    let tensors = store
        .iter()
        .map(|(_, name, t)| {
            let e = IndexEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset,
                len: t.numel(),
            };
            offset += t.numel();
            e
        })
        .collect();
    let index = serde_json::to_vec(&Index {
        meta: meta.clone(),
        tensors,
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(index.len() as u64).to_le_bytes())?;
    w.write_all(&index)?;
    for (_, _, t) in store.iter() {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<(ParamStore, serde_json::Value)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TensorError::Format("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(TensorError::Format(format!("unsupported version {version}")));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let index_len = usize::try_from(u64::from_le_bytes(u64buf))
        .map_err(|_| TensorError::Format("index length overflows".into()))?;
    let mut index = vec![0u8; index_len];
    r.read_exact(&mut index)?;
    let index: Index = serde_json::from_slice(&index)?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() % 8 != 0 {
        return Err(TensorError::Format("payload is not a whole number of f64".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    let mut store = ParamStore::new();
    for e in index.tensors {
        let end = e.offset.checked_add(e.len).filter(|&end| end <= values.len());
        let Some(end) = end else {
            return Err(TensorError::Format(format!("tensor {} exceeds payload", e.name)));
        };
        if store.id(&e.name).is_some() {
            return Err(TensorError::Format(format!("duplicate tensor {}", e.name)));
        }
        let t = Tensor::new(e.shape, values[e.offset..end].to_vec())?;
        store.insert(e.name, t);
    }
    Ok((store, index.meta))
}

/// Writes through a temporary sibling file and renames it into place.
pub fn save_params(path: &Path, store: &ParamStore, meta: &serde_json::Value) -> Result<()> {
    let mut buf = Vec::new();
    write_params(&mut buf, store, meta)?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<(ParamStore, serde_json::Value)> {
    let bytes = std::fs::read(path)?;
    read_params(bytes.as_slice())
}
