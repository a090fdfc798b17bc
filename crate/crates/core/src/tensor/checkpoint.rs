//! Single-file tensor container used for network parameters and optimizer
//! state.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       8     magic "LSTPTNSR"
//! 8       4     u32 format version (1)
//! 12      8     u64 manifest length L in bytes
//! 20      L     manifest, UTF-8 JSON
//! 20+L    ...   data section: raw little-endian IEEE-754 arrays
//! ```
//!
//! The manifest is
//! `{"kind": str, "metadata": any, "tensors": [{"name", "dtype", "shape",
//! "offset", "nbytes"}]}` where `offset` is relative to the start of the
//! data section and `dtype` is `"f32"` or `"f64"`. Tensors are written in
//! manifest order without padding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Array, Precision, Real};

pub const MAGIC: &[u8; 8] = b"LSTPTNSR";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub dtype: Precision,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub nbytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub metadata: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

/// Decoded file contents, converted to the caller's precision.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile<T> {
    pub kind: String,
    pub metadata: serde_json::Value,
    pub tensors: Vec<(String, Array<T>)>,
}

impl<T: Real> TensorFile<T> {
    pub fn get(&self, name: &str) -> Option<&Array<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }
}

pub fn encode<T: Real>(
    kind: &str,
    metadata: &serde_json::Value,
    tensors: &[(&str, &Array<T>)],
) -> Result<Vec<u8>, CheckpointError> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, a) in tensors {
        let nbytes = (a.len() * T::PRECISION.byte_size()) as u64;
        entries.push(TensorEntry {
            name: name.to_string(),
            dtype: T::PRECISION,
            shape: a.shape().to_vec(),
            offset,
            nbytes,
        });
        offset += nbytes;
    }
    let manifest = serde_json::to_vec(&Manifest {
        kind: kind.to_string(),
        metadata: metadata.clone(),
        tensors: entries,
    })?;
    let mut out = Vec::with_capacity(HEADER_LEN + manifest.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for (_, a) in tensors {
        for &x in a.data() {
            x.write_le(&mut out);
        }
    }
    Ok(out)
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<TensorFile<T>, CheckpointError> {
    let fmt = |m: String| CheckpointError::Format(m);
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(fmt("missing magic header".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(fmt(format!("unsupported version {version}")));
    }
    let mlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let data_start = HEADER_LEN
        .checked_add(mlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| fmt(format!("manifest length {mlen} exceeds file")))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[HEADER_LEN..data_start])?;
    let data = &bytes[data_start..];
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for e in &manifest.tensors {
        let numel: usize = e.shape.iter().product();
        let width = e.dtype.byte_size();
        if numel * width != e.nbytes as usize {
            return Err(fmt(format!(
                "tensor {}: shape {:?} disagrees with {} bytes",
                e.name, e.shape, e.nbytes
            )));
        }
        let start = e.offset as usize;
        let raw = data
            .get(start..start + e.nbytes as usize)
            .ok_or_else(|| fmt(format!("tensor {} runs past end of file", e.name)))?;
        let values: Vec<T> = raw
            .chunks_exact(width)
            .map(|c| match e.dtype {
                Precision::F32 => T::from_f64(f32::read_le(c) as f64),
                Precision::F64 => T::from_f64(f64::read_le(c)),
            })
            .collect();
        let arr = Array::new(&e.shape, values).map_err(|err| fmt(format!("tensor {}: {err}", e.name)))?;
        tensors.push((e.name.clone(), arr));
    }
    Ok(TensorFile {
        kind: manifest.kind,
        metadata: manifest.metadata,
        tensors,
    })
}

pub fn save<T: Real>(
    path: &Path,
    kind: &str,
    metadata: &serde_json::Value,
    tensors: &[(&str, &Array<T>)],
) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(kind, metadata, tensors)?)?;
    Ok(())
}

pub fn load<T: Real>(path: &Path) -> Result<TensorFile<T>, CheckpointError> {
    decode(&std::fs::read(path)?)
}
