//! Checkpoint files: `ESRW1` magic, little-endian `u32` manifest length,
//! JSON manifest, then a blob of little-endian `f64` values.
//!
//! The blob holds the network parameters, optionally followed by the Adam
//! first and second moments when the file doubles as a training snapshot.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::{AdamConfig, AdamState};
use super::tinynet::{self, TinyNet};
use super::SrOperator;
use crate::error::{Error, Result};
use crate::resample::ScaleFactor;

pub const MAGIC: &[u8; 5] = b"ESRW1";
pub const FORMAT_VERSION: u32 = 1;
pub const BICUBIC_ARCH: &str = "bicubic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Number of completed epochs.
    pub epoch: usize,
    pub adam_t: u64,
    pub adam: AdamConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub arch: String,
    pub scale: usize,
    pub seed: u64,
    pub param_shapes: Vec<Vec<usize>>,
    pub blob_len: usize,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_state: Option<TrainState>,
}

/// A decoded checkpoint, with optimizer state when present.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub manifest: Manifest,
    pub operator: SrOperator,
    pub optimizer: Option<(AdamState, TrainState)>,
}

fn encode_parts(op: &SrOperator, train: Option<(&AdamState, &TrainState)>) -> Vec<u8> {
    let (arch, seed, shapes, params): (&str, u64, Vec<Vec<usize>>, &[f64]) = match op {
        SrOperator::Bicubic { .. } => (BICUBIC_ARCH, 0, Vec::new(), &[]),
        SrOperator::TinyNet { seed, net, .. } => (
            tinynet::ARCH_NAME,
            *seed,
            tinynet::param_shapes(),
            net.params(),
        ),
    };
    let mut blob = Vec::new();
    let mut push = |vals: &[f64]| {
        for v in vals {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    };
    push(params);
    if let Some((adam, _)) = train {
        push(&adam.m);
        push(&adam.v);
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        arch: arch.to_string(),
        scale: op_scale(op).get(),
        seed,
        param_shapes: shapes,
        blob_len: blob.len(),
        sha256: hex::encode(Sha256::digest(&blob)),
        train_state: train.map(|(_, s)| s.clone()),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    out
}

fn op_scale(op: &SrOperator) -> ScaleFactor {
    match op {
        SrOperator::Bicubic { scale } | SrOperator::TinyNet { scale, .. } => *scale,
    }
}

fn split(bytes: &[u8]) -> Result<(Manifest, &[u8])> {
    let head = MAGIC.len() + 4;
    if bytes.len() < head || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Checkpoint("missing ESRW1 magic".into()));
    }
    let len = u32::from_le_bytes(bytes[MAGIC.len()..head].try_into().unwrap()) as usize;
    let end = head
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("manifest length exceeds file size".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[head..end])
        .map_err(|e| Error::Checkpoint(format!("malformed manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok((manifest, &bytes[end..]))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let (manifest, blob) = split(bytes)?;
    if blob.len() != manifest.blob_len {
        return Err(Error::Checkpoint(format!(
            "blob is {} bytes, manifest says {}",
            blob.len(),
            manifest.blob_len
        )));
    }
    if hex::encode(Sha256::digest(blob)) != manifest.sha256 {
        return Err(Error::Checkpoint("blob checksum mismatch".into()));
    }
    let scale = ScaleFactor::new(manifest.scale)
        .map_err(|_| Error::Checkpoint(format!("invalid scale {}", manifest.scale)))?;
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let n_params = match manifest.arch.as_str() {
        BICUBIC_ARCH => 0,
        tinynet::ARCH_NAME => {
            if manifest.param_shapes != tinynet::param_shapes() {
                return Err(Error::Checkpoint(format!(
                    "parameter shapes {:?} do not match {}",
                    manifest.param_shapes,
                    tinynet::ARCH_NAME
                )));
            }
            tinynet::param_count()
        }
        other => {
            return Err(Error::Checkpoint(format!("unknown architecture {other:?}")));
        }
    };
    let n_state = if manifest.train_state.is_some() { 3 } else { 1 };
    if values.len() != n_params * n_state {
        return Err(Error::Checkpoint(format!(
            "blob holds {} values, architecture needs {}",
            values.len(),
            n_params * n_state
        )));
    }

    let operator = if manifest.arch == BICUBIC_ARCH {
        SrOperator::Bicubic { scale }
    } else {
        SrOperator::TinyNet {
            scale,
            seed: manifest.seed,
            net: TinyNet::from_params(values[..n_params].to_vec())?,
        }
    };
    let optimizer = manifest.train_state.clone().map(|ts| {
        let state = AdamState {
            m: values[n_params..2 * n_params].to_vec(),
            v: values[2 * n_params..].to_vec(),
            t: ts.adam_t,
        };
        (state, ts)
    });
    Ok(Checkpoint {
        manifest,
        operator,
        optimizer,
    })
}

pub fn encode(op: &SrOperator) -> Vec<u8> {
    encode_parts(op, None)
}

pub fn save_weights(op: &SrOperator, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(op))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<SrOperator> {
    Ok(decode(&fs::read(path)?)?.operator)
}

/// Loads a checkpoint and checks it was trained for `scale`.
pub fn load_weights_for_scale(path: impl AsRef<Path>, scale: ScaleFactor) -> Result<SrOperator> {
    let op = load_weights(path)?;
    let model = op_scale(&op);
    if model != scale {
        return Err(Error::ScaleMismatch {
            model: model.get(),
            requested: scale.get(),
        });
    }
    Ok(op)
}

/// Reads just the manifest (checksum is not verified).
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let bytes = fs::read(path)?;
    Ok(split(&bytes)?.0)
}

pub fn save_training_state(
    path: impl AsRef<Path>,
    op: &SrOperator,
    adam: &AdamState,
    state: &TrainState,
) -> Result<()> {
    if op.net().is_none() {
        return Err(Error::NotTrainable);
    }
    fs::write(path, encode_parts(op, Some((adam, state))))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode(&fs::read(path)?)
}
