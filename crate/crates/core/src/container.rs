//! Binary container shared by model checkpoints and PCA files: 4-byte
//! magic, u32 version, u32 header length, JSON header, then little-endian
//! f32 payload.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CONTAINER_VERSION: u32 = 1;

pub(crate) fn encode<H: Serialize>(
    magic: &[u8; 4],
    header: &H,
    payload: &[f64],
) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in payload {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub(crate) fn decode<H: DeserializeOwned>(
    kind: &'static str,
    magic: &[u8; 4],
    bytes: &[u8],
) -> Result<(H, Vec<f64>)> {
    let bad = |reason: &str| Error::Malformed {
        kind,
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CONTAINER_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < len {
        return Err(bad("truncated header"));
    }
    let header: H = serde_json::from_slice(&body[..len]).map_err(|e| bad(&e.to_string()))?;
    let payload = &body[len..];
    if !payload.len().is_multiple_of(4) {
        return Err(bad("payload is not a whole number of f32 values"));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((header, values))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
