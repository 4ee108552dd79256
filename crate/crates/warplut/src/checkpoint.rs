//! Checkpoints: a JSON document plus a raw little-endian `f32` parameter
//! blob stored next to it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use warplut_core::{Network, NetworkSpec, TrainConfig};

use crate::config::DatasetSpec;

pub const CHECKPOINT_FORMAT: &str = "warplut-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format: String,
    pub version: u32,
    /// Resolved architecture; rebuilding it reproduces the wiring.
    pub architecture: NetworkSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSpec>,
    pub step: u64,
    /// Blob file name, relative to the JSON document.
    pub blob: String,
    pub blob_sha256: String,
    pub param_count: usize,
    pub wiring_fingerprint: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed checkpoint: {msg}")]
    Malformed { path: PathBuf, msg: String },
    #[error("{path}: checkpoint format version {found}, this build reads version {expected}")]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: {msg}")]
    Mismatch { path: PathBuf, msg: String },
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn blob_path(json: &Path) -> PathBuf {
    json.with_extension("bin")
}

/// Writes `<path>` and its blob `<path with .bin extension>`.
pub fn save_checkpoint(
    path: &Path,
    network: &Network,
    train: Option<&TrainConfig>,
    dataset: Option<&DatasetSpec>,
    step: u64,
) -> Result<CheckpointMeta, CheckpointError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| CheckpointError::Io { path: p, source }
    };
    let blob: Vec<u8> = network
        .flat_params()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    let bpath = blob_path(path);
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        architecture: network.spec().resolved(),
        train: train.cloned(),
        dataset: dataset.cloned(),
        step,
        blob: bpath
            .file_name()
            .expect("checkpoint path has a file name")
            .to_string_lossy()
            .into_owned(),
        blob_sha256: hex(&Sha256::digest(&blob)),
        param_count: network.param_count(),
        wiring_fingerprint: network.wiring_fingerprint(),
    };
    fs::write(&bpath, &blob).map_err(io(&bpath))?;
    let json = serde_json::to_string_pretty(&meta).expect("checkpoint serializes");
    fs::write(path, json).map_err(io(path))?;
    Ok(meta)
}

/// Reads a checkpoint and rebuilds the network it describes.
pub fn load_checkpoint(path: &Path) -> Result<(Network, CheckpointMeta), CheckpointError> {
    let malformed = |msg: String| CheckpointError::Malformed {
        path: path.into(),
        msg,
    };
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.into(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
        return Err(malformed("missing or wrong \"format\" field".into()));
    }
    let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            path: path.into(),
            found,
            expected: CHECKPOINT_VERSION,
        });
    }
    let meta: CheckpointMeta = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
    let bpath = path.parent().unwrap_or(Path::new(".")).join(&meta.blob);
    let blob = fs::read(&bpath).map_err(|source| CheckpointError::Io {
        path: bpath.clone(),
        source,
    })?;
    if hex(&Sha256::digest(&blob)) != meta.blob_sha256 {
        return Err(CheckpointError::Mismatch {
            path: bpath,
            msg: "parameter blob checksum mismatch".into(),
        });
    }
    if blob.len() != meta.param_count * 4 {
        return Err(CheckpointError::Mismatch {
            path: bpath,
            msg: format!("blob holds {} bytes for {} parameters", blob.len(), meta.param_count),
        });
    }
    let mut network = Network::build(&meta.architecture).map_err(|e| malformed(e.to_string()))?;
    if network.wiring_fingerprint() != meta.wiring_fingerprint {
        return Err(CheckpointError::Mismatch {
            path: path.into(),
            msg: "rebuilt wiring does not match the recorded fingerprint".into(),
        });
    }
    let values: Vec<f64> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    network.load_flat_params(&values).map_err(|e| malformed(e.to_string()))?;
    Ok((network, meta))
}
