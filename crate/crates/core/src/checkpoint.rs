//! Shared checkpoint format: one JSON header line, then a raw blob of
//! little-endian 32-bit floats. All persisted artifacts (embeddings,
//! networks, diffusion models, belief tables, truth grids) use it.
//!
//! Readers validate `kind` and `format_version` before touching the blob,
//! so a corrupted or foreign file fails with a format error instead of
//! garbage numbers.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::fingerprint_hex;

pub const FORMAT_VERSION: u32 = 1;

/// Serialize header + floats into the on-disk byte layout.
pub fn to_bytes<H: Serialize>(header: &H, floats: &[f32]) -> Result<Vec<u8>> {
    let json = serde_json::to_string(header)
        .map_err(|e| Error::format(format!("header serialization failed: {e}")))?;
    let mut out = Vec::with_capacity(json.len() + 1 + floats.len() * 4);
    out.extend_from_slice(json.as_bytes());
    out.push(b'\n');
    for &f in floats {
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Parse bytes produced by [`to_bytes`].
pub fn from_bytes<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<f32>)> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format("checkpoint has no header line".to_string()))?;
    let header: H = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::format(format!("bad checkpoint header: {e}")))?;
    let blob = &bytes[newline + 1..];
    if blob.len() % 4 != 0 {
        return Err(Error::format(format!(
            "float blob length {} is not a multiple of 4",
            blob.len()
        )));
    }
    let floats = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header, floats))
}

pub fn write<H: Serialize>(path: &Path, header: &H, floats: &[f32]) -> Result<()> {
    fs::write(path, to_bytes(header, floats)?)?;
    Ok(())
}

pub fn read<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<f32>)> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes)
}

/// Check the (kind, format_version) pair every header carries.
pub fn expect_kind(kind: &str, version: u32, expected_kind: &str) -> Result<()> {
    if kind != expected_kind {
        return Err(Error::format(format!(
            "checkpoint kind '{kind}' where '{expected_kind}' was expected"
        )));
    }
    if version != FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Fingerprint of an artifact's exact on-disk bytes.
pub fn fingerprint_file(path: &Path) -> Result<String> {
    Ok(fingerprint_hex(&fs::read(path)?))
}

/// Lossy f64 -> f32 blob conversion used by all writers.
pub fn to_f32(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}

/// Blob floats back to f64 for in-memory use.
pub fn to_f64(values: &[f32]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}
