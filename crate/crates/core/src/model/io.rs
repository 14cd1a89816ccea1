//! Checkpoint (`RVBM`) and feature (`RVBF`) files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ReverbFeature, ReverbModel};
use crate::container;
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 4] = b"RVBM";
const FEATURE_MAGIC: &[u8; 4] = b"RVBF";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    extra: serde_json::Value,
}

impl ReverbModel {
    /// Serializes parameters as f32; `extra` is stored verbatim in the
    /// header (training config, seed, step count).
    pub fn to_bytes(&self, extra: serde_json::Value) -> Result<Vec<u8>> {
        let params = self.params();
        let header = CheckpointHeader {
            config: self.config,
            tensors: params
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.to_string(),
                    shape: t.shape(),
                })
                .collect(),
            extra,
        };
        let payload: Vec<f64> = params
            .iter()
            .flat_map(|(_, t)| t.data().iter().copied())
            .collect();
        container::encode(MODEL_MAGIC, &header, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, serde_json::Value)> {
        let bad = |reason: String| Error::Malformed {
            kind: "checkpoint",
            reason,
        };
        let (header, payload): (CheckpointHeader, Vec<f64>) =
            container::decode("checkpoint", MODEL_MAGIC, bytes)?;
        let mut model = ReverbModel::init(header.config, 0)?;
        let expected: Vec<(String, [usize; 2])> = model
            .params()
            .iter()
            .map(|(n, t)| (n.to_string(), t.shape()))
            .collect();
        if expected.len() != header.tensors.len() {
            return Err(bad(format!(
                "{} tensors, expected {}",
                header.tensors.len(),
                expected.len()
            )));
        }
        for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
            if *name != entry.name || *shape != entry.shape {
                return Err(bad(format!(
                    "unexpected tensor {} {:?}",
                    entry.name, entry.shape
                )));
            }
        }
        let total: usize = expected.iter().map(|(_, s)| s[0] * s[1]).sum();
        if payload.len() != total {
            return Err(bad(format!(
                "payload has {} values, expected {total}",
                payload.len()
            )));
        }
        let mut offset = 0;
        for p in model.params_mut() {
            let n = p.data().len();
            p.data_mut().copy_from_slice(&payload[offset..offset + n]);
            offset += n;
        }
        Ok((model, header.extra))
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        container::write_file(path, &self.to_bytes(extra)?)
    }

    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        Self::from_bytes(&container::read_file(path)?)
    }
}

pub fn write_feature_bytes(c: &ReverbFeature) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * c.dim());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(c.dim() as u32).to_le_bytes());
    for v in c.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn read_feature_bytes(bytes: &[u8]) -> Result<ReverbFeature> {
    let bad = |reason: &str| Error::Malformed {
        kind: "feature",
        reason: reason.to_string(),
    };
    if bytes.len() < 8 || &bytes[..4] != FEATURE_MAGIC {
        return Err(bad("bad magic"));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + 4 * dim {
        return Err(bad(&format!(
            "expected {dim} values, found {} bytes",
            bytes.len() - 8
        )));
    }
    let values = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    ReverbFeature::new(values)
}

pub fn write_feature(path: &Path, c: &ReverbFeature) -> Result<()> {
    container::write_file(path, &write_feature_bytes(c))
}

pub fn read_feature(path: &Path) -> Result<ReverbFeature> {
    read_feature_bytes(&container::read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_is_f32_exact() {
        let m = ReverbModel::init(ModelConfig::new(6), 3).unwrap();
        let bytes = m.to_bytes(serde_json::json!({"steps": 7})).unwrap();
        assert_eq!(&bytes[..4], b"RVBM");
        let (back, extra) = ReverbModel::from_bytes(&bytes).unwrap();
        assert_eq!(extra["steps"], 7);
        for ((_, a), (_, b)) in m.params().iter().zip(back.params()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        // A second round trip is lossless.
        let again = ReverbModel::from_bytes(&back.to_bytes(extra).unwrap())
            .unwrap()
            .0;
        assert_eq!(again, back);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let m = ReverbModel::init(ModelConfig::new(4), 3).unwrap();
        let bytes = m.to_bytes(serde_json::Value::Null).unwrap();
        assert!(ReverbModel::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        assert!(ReverbModel::from_bytes(b"RVBF\0\0\0\0").is_err());
    }

    #[test]
    fn feature_round_trip() {
        let c = ReverbFeature::new(vec![0.5, -1.0, 3.25]).unwrap();
        let bytes = write_feature_bytes(&c);
        assert_eq!(bytes.len(), 8 + 12);
        assert_eq!(read_feature_bytes(&bytes).unwrap(), c);
        assert!(read_feature_bytes(&bytes[..19]).is_err());
        assert!(read_feature_bytes(b"RVBM\x01\0\0\0\0\0\0\0").is_err());
    }
}
