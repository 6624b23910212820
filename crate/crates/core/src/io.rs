//! The AETF array format and `key=value` sidecar metadata.
//!
//! Layout: `AETF`, u32 version (1), u32 rank, u32 dims[rank], then the
//! product of dims f64 values, all little-endian, last axis fastest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{AetError, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

const MAGIC: &[u8; 4] = b"AETF";
const VERSION: u32 = 1;

pub fn encode(dims: &[usize], values: &[f64]) -> Result<Vec<u8>> {
    if dims.iter().product::<usize>() != values.len() {
        return Err(AetError::Format(format!(
            "dims {dims:?} do not match {} values",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(12 + 4 * dims.len() + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| AetError::Format(format!("dimension {d} too large")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| AetError::Format("truncated header".into()))
}

pub fn decode(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(AetError::Format("bad magic".into()));
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(AetError::Format(format!("unsupported version {version}")));
    }
    let rank = read_u32(bytes, 8)? as usize;
    if rank == 0 || rank > 8 {
        return Err(AetError::Format(format!("unsupported rank {rank}")));
    }
    let dims = (0..rank)
        .map(|a| read_u32(bytes, 12 + 4 * a).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| AetError::Format("size overflow".into()))?;
    let start = 12 + 4 * rank;
    let body = &bytes[start..];
    if body.len() != count * 8 {
        return Err(AetError::Format(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            body.len()
        )));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((dims, values))
}

pub fn write_array(path: &Path, dims: &[usize], values: &[f64]) -> Result<()> {
    fs::write(path, encode(dims, values)?)?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    decode(&fs::read(path)?)
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    write_array(path, &f.grid().shape(), f.values())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let (dims, values) = read_array(path)?;
    if !(dims.len() == 2 || dims.len() == 3) || dims.iter().any(|&d| d != dims[0]) {
        return Err(AetError::Format(format!("{dims:?} is not a square or cubic grid")));
    }
    ScalarField::from_values(Grid::new(dims.len(), dims[0])?, values)
}

/// Sidecar path: `<file>.meta`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Ordered `key=value` metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata(pub BTreeMap<String, String>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| AetError::Format(format!("metadata line {}: missing '='", no + 1)))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, data_path: &Path) -> Result<()> {
        fs::write(meta_path(data_path), self.to_text())?;
        Ok(())
    }

    pub fn read(data_path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(meta_path(data_path))?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Hash of a field's AETF encoding, used as a provenance tag.
pub fn field_hash(f: &ScalarField) -> String {
    sha256_hex(&encode(&f.grid().shape(), f.values()).expect("consistent field"))
}
