//! Run configuration documents.
//!
//! Paths inside a config are resolved against the directory holding it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use warplut_core::data::{make_parity_dataset, split_train_val, thermometer_encode, Dataset, EncoderSpec};
use warplut_core::layers::{InitScheme, NodeKind};
use warplut_core::network::LayerSpec;
use warplut_core::{NetworkSpec, TrainConfig};

use crate::cache::{read_cache, write_cache};
use crate::cifar::load_cifar10_binary;
use crate::CliError;

/// Environment variable consulted when a CIFAR-10 config names no directory.
pub const DATA_ENV: &str = "WARPLUT_DATA";

fn default_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// The binary CIFAR-10 distribution, thermometer encoded and split.
    Cifar10 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dir: Option<PathBuf>,
        #[serde(default)]
        encoder: EncoderSpec,
        #[serde(default = "default_fraction")]
        split_fraction: f64,
        #[serde(default)]
        split_seed: u64,
        /// Keep only the first examples of the training split.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_subset: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        val_subset: Option<usize>,
        /// Encoded-dataset cache file, written on first use.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache: Option<PathBuf>,
    },
    /// All `2^k` vectors; training and validation sets coincide.
    Parity { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Architecture document.
    pub architecture: PathBuf,
    pub train: TrainConfig,
    pub dataset: DatasetSpec,
    pub output_dir: PathBuf,
    /// Overrides the node kind of every layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeKind>,
    /// Overrides the init scheme of every layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitScheme>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parses `path` and makes every path in it absolute.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.architecture = resolve(&base, &cfg.architecture);
        cfg.output_dir = resolve(&base, &cfg.output_dir);
        if let DatasetSpec::Cifar10 { dir, cache, .. } = &mut cfg.dataset {
            if let Some(d) = dir {
                *d = resolve(&base, d);
            }
            if let Some(c) = cache {
                *c = resolve(&base, c);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.architecture.is_file() {
            return Err(CliError::Config(format!(
                "architecture file {} does not exist",
                self.architecture.display()
            )));
        }
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(init) = &self.init {
            init.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Architecture with the config's node and init overrides applied.
    pub fn network_spec(&self) -> Result<NetworkSpec, CliError> {
        let mut spec = load_architecture(&self.architecture)?;
        if let Some(kind) = self.node {
            spec = spec.with_node_kind(kind);
        }
        if let Some(scheme) = self.init {
            for layer in &mut spec.layers {
                if let LayerSpec::Dense { init, .. } | LayerSpec::Conv { init, .. } = layer {
                    *init = scheme;
                }
            }
        }
        Ok(spec.resolved())
    }
}

pub fn load_architecture(path: &Path) -> Result<NetworkSpec, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Training and validation sets described by `spec`.
pub fn load_dataset(spec: &DatasetSpec) -> Result<(Dataset, Dataset), CliError> {
    let data_err = |e: warplut_core::Error| CliError::Data(e.to_string());
    match spec {
        DatasetSpec::Parity { k } => {
            let ds = make_parity_dataset(*k).map_err(data_err)?;
            Ok((ds.clone(), ds))
        }
        DatasetSpec::Cifar10 {
            dir,
            encoder,
            split_fraction,
            split_seed,
            train_subset,
            val_subset,
            cache,
        } => {
            let encoded = match cache {
                Some(c) if c.is_file() => read_cache(c).map_err(|e| CliError::Data(format!("{}: {e}", c.display())))?,
                _ => {
                    let dir = match dir {
                        Some(d) => d.clone(),
                        None => std::env::var_os(DATA_ENV).map(PathBuf::from).ok_or_else(|| {
                            CliError::Data(format!("no CIFAR-10 directory configured and {DATA_ENV} is unset"))
                        })?,
                    };
                    if !dir.is_dir() {
                        return Err(CliError::Data(format!("dataset directory {} does not exist", dir.display())));
                    }
                    let raw = load_cifar10_binary(&dir).map_err(|e| CliError::Data(e.to_string()))?;
                    let ds = thermometer_encode(&raw.train, encoder).map_err(data_err)?;
                    if let Some(c) = cache {
                        write_cache(c, &ds).map_err(|e| CliError::Data(format!("{}: {e}", c.display())))?;
                    }
                    ds
                }
            };
            let (mut train, mut val) = split_train_val(&encoded, *split_fraction, *split_seed).map_err(data_err)?;
            if let Some(n) = train_subset {
                train = train.take(*n);
            }
            if let Some(n) = val_subset {
                val = val.take(*n);
            }
            Ok((train, val))
        }
    }
}
