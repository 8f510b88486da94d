//! Dense f32 checkpoints and the `PMRG` container.
//!
//! Layout (little-endian):
//!
//! ```text
//! "PMRG"                      4 bytes
//! header length               u32
//! header                      UTF-8 JSON
//! payload                     raw f32 data, one 8-byte aligned block per tensor
//! ```
//!
//! The header is `{"tensors": {name: {"shape", "offset", "nbytes"}}, "metadata": {..}}`
//! with offsets relative to the start of the payload. The writer emits
//! tensors in name order with zero padding up to each aligned offset, so a
//! checkpoint has exactly one byte representation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PMRG";
const ALIGN: u64 = 8;
const PREAMBLE: u64 = 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected \"PMRG\"")]
    BadMagic,
    #[error("truncated container: {0}")]
    Truncated(String),
    #[error("tensor {tensor:?} at byte {offset}: payload truncated (needs {needed} bytes, {available} available)")]
    TruncatedTensor {
        tensor: String,
        offset: u64,
        needed: u64,
        available: u64,
    },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("tensor {tensor:?} at byte {offset}: {reason}")]
    OffsetMismatch {
        tensor: String,
        offset: u64,
        reason: String,
    },
    #[error("tensor {tensor:?} at byte {offset}: non-finite value {value}")]
    NonFinite {
        tensor: String,
        offset: u64,
        value: f32,
    },
    #[error("tensor {tensor:?}: unsupported dtype {dtype:?}, only f32 is stored")]
    Dtype { tensor: String, dtype: String },
    #[error("container must hold at least one tensor")]
    Empty,
    #[error("tensor {name:?}: {reason}")]
    InvalidTensor { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, String> {
        if shape.is_empty() {
            return Err("shape must have at least one dimension".into());
        }
        if shape.contains(&0) {
            return Err(format!("shape {shape:?} has a zero dimension"));
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| format!("shape {shape:?} overflows"))?;
        if numel != data.len() {
            return Err(format!(
                "shape {shape:?} holds {numel} elements but data has {}",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Same shape, new data. Panics if the length differs.
    pub(crate) fn with_data(&self, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), self.data.len());
        Self {
            shape: self.shape.clone(),
            data,
        }
    }
}

/// Named tensors plus free-form provenance metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    tensors: BTreeMap<String, Tensor>,
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), CheckpointError> {
        let name = name.into();
        if name.is_empty() {
            return Err(CheckpointError::InvalidTensor {
                name,
                reason: "tensor names must be non-empty".into(),
            });
        }
        if self.tensors.contains_key(&name) {
            return Err(CheckpointError::InvalidTensor {
                name,
                reason: "duplicate tensor name".into(),
            });
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn with_tensor(mut self, name: &str, shape: Vec<usize>, data: Vec<f32>) -> Result<Self, CheckpointError> {
        let tensor = Tensor::new(shape, data).map_err(|reason| CheckpointError::InvalidTensor {
            name: name.to_string(),
            reason,
        })?;
        self.insert(name, tensor)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Tensors in name order.
    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub(crate) fn from_parts(tensors: BTreeMap<String, Tensor>, metadata: BTreeMap<String, String>) -> Self {
        Self { tensors, metadata }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    tensors: BTreeMap<String, HeaderEntry>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dtype: Option<String>,
    shape: Vec<usize>,
    offset: u64,
    nbytes: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Reject NaN and infinite elements.
    pub validate_finite: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            validate_finite: true,
        }
    }
}

fn align_up(n: u64) -> u64 {
    n.div_ceil(ALIGN) * ALIGN
}

pub fn to_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>, CheckpointError> {
    if ckpt.is_empty() {
        return Err(CheckpointError::Empty);
    }
    let mut entries = BTreeMap::new();
    let mut cursor = 0u64;
    for (name, t) in &ckpt.tensors {
        cursor = align_up(cursor);
        let nbytes = 4 * t.len() as u64;
        entries.insert(
            name.clone(),
            HeaderEntry {
                dtype: None,
                shape: t.shape.clone(),
                offset: cursor,
                nbytes,
            },
        );
        cursor += nbytes;
    }
    let header = serde_json::to_vec(&Header {
        tensors: entries,
        metadata: ckpt.metadata.clone(),
    })
    .map_err(|e| CheckpointError::Header(e.to_string()))?;
    let header_len = u32::try_from(header.len()).map_err(|_| CheckpointError::Header("header exceeds 4 GiB".into()))?;

    let mut out = Vec::with_capacity(PREAMBLE as usize + header.len() + cursor as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    let payload_start = out.len();
    for t in ckpt.tensors.values() {
        let pad = align_up((out.len() - payload_start) as u64) as usize + payload_start;
        out.resize(pad, 0);
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8], opts: LoadOptions) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 4 {
        return Err(CheckpointError::Truncated(format!("{} bytes, no magic", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < PREAMBLE as usize {
        return Err(CheckpointError::Truncated("missing header length".into()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as u64;
    let payload_start = PREAMBLE + header_len;
    if (bytes.len() as u64) < payload_start {
        return Err(CheckpointError::Truncated(format!(
            "header declares {header_len} bytes, only {} present",
            bytes.len() as u64 - PREAMBLE
        )));
    }
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE as usize..payload_start as usize])
        .map_err(|e| CheckpointError::Header(e.to_string()))?;
    if header.tensors.is_empty() {
        return Err(CheckpointError::Empty);
    }
    let payload = &bytes[payload_start as usize..];

    let mut spans: Vec<(u64, u64, &str)> = Vec::with_capacity(header.tensors.len());
    let mut tensors = BTreeMap::new();
    for (name, entry) in &header.tensors {
        let abs = payload_start + entry.offset;
        if name.is_empty() {
            return Err(CheckpointError::Header("empty tensor name".into()));
        }
        if let Some(dtype) = &entry.dtype {
            if !dtype.eq_ignore_ascii_case("f32") {
                return Err(CheckpointError::Dtype {
                    tensor: name.clone(),
                    dtype: dtype.clone(),
                });
            }
        }
        let numel: u64 = entry.shape.iter().map(|&d| d as u64).product();
        if entry.shape.is_empty() || entry.shape.contains(&0) {
            return Err(CheckpointError::InvalidTensor {
                name: name.clone(),
                reason: format!("invalid shape {:?}", entry.shape),
            });
        }
        if entry.nbytes != 4 * numel {
            return Err(CheckpointError::OffsetMismatch {
                tensor: name.clone(),
                offset: abs,
                reason: format!("nbytes {} does not match shape {:?} of f32", entry.nbytes, entry.shape),
            });
        }
        if entry.offset % ALIGN != 0 {
            return Err(CheckpointError::OffsetMismatch {
                tensor: name.clone(),
                offset: abs,
                reason: format!("offset {} is not {ALIGN}-byte aligned", entry.offset),
            });
        }
        let end = entry.offset.checked_add(entry.nbytes).unwrap_or(u64::MAX);
        if end > payload.len() as u64 {
            return Err(CheckpointError::TruncatedTensor {
                tensor: name.clone(),
                offset: abs,
                needed: entry.nbytes,
                available: (payload.len() as u64).saturating_sub(entry.offset),
            });
        }
        spans.push((entry.offset, end, name));

        let raw = &payload[entry.offset as usize..end as usize];
        let mut data = Vec::with_capacity(numel as usize);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if opts.validate_finite && !v.is_finite() {
                return Err(CheckpointError::NonFinite {
                    tensor: name.clone(),
                    offset: abs + 4 * i as u64,
                    value: v,
                });
            }
            data.push(v);
        }
        tensors.insert(
            name.clone(),
            Tensor {
                shape: entry.shape.clone(),
                data,
            },
        );
    }

    spans.sort_unstable();
    for pair in spans.windows(2) {
        let (_, prev_end, prev) = pair[0];
        let (start, _, name) = pair[1];
        if start < prev_end {
            return Err(CheckpointError::OffsetMismatch {
                tensor: name.to_string(),
                offset: payload_start + start,
                reason: format!("overlaps tensor {prev:?}"),
            });
        }
    }

    Ok(Checkpoint::from_parts(tensors, header.metadata))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    load_checkpoint_with(path, LoadOptions::default())
}

pub fn load_checkpoint_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Checkpoint, CheckpointError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes, opts)
}

/// Writes through a sibling temp file and renames, so readers never see a
/// partial container.
pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let bytes = to_bytes(ckpt)?;
    crate::io::write_atomic(path, &bytes).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeMismatch {
    pub name: String,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompatibilityReport {
    /// Names present in the first checkpoint only.
    pub missing_in_second: BTreeSet<String>,
    /// Names present in the second checkpoint only.
    pub missing_in_first: BTreeSet<String>,
    pub shape_mismatches: Vec<ShapeMismatch>,
}

impl CompatibilityReport {
    pub fn is_compatible(&self) -> bool {
        self.missing_in_first.is_empty() && self.missing_in_second.is_empty() && self.shape_mismatches.is_empty()
    }
}

impl std::fmt::Display for CompatibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_compatible() {
            return write!(f, "compatible");
        }
        let mut parts = Vec::new();
        if !self.missing_in_second.is_empty() {
            parts.push(format!("missing in second: {:?}", self.missing_in_second));
        }
        if !self.missing_in_first.is_empty() {
            parts.push(format!("missing in first: {:?}", self.missing_in_first));
        }
        for m in &self.shape_mismatches {
            parts.push(format!("{:?}: shape {:?} vs {:?}", m.name, m.first, m.second));
        }
        write!(f, "{}", parts.join("; "))
    }
}

pub fn check_compatible(a: &Checkpoint, b: &Checkpoint) -> CompatibilityReport {
    let mut report = CompatibilityReport::default();
    for (name, ta) in &a.tensors {
        match b.tensors.get(name) {
            None => {
                report.missing_in_second.insert(name.clone());
            }
            Some(tb) if tb.shape != ta.shape => report.shape_mismatches.push(ShapeMismatch {
                name: name.clone(),
                first: ta.shape.clone(),
                second: tb.shape.clone(),
            }),
            Some(_) => {}
        }
    }
    for name in b.tensors.keys() {
        if !a.tensors.contains_key(name) {
            report.missing_in_first.insert(name.clone());
        }
    }
    report
}
