//! Binary checkpoints.
//!
//! Layout, all integers little endian:
//!
//! ```text
//! b"HCFQCKPT"            8 bytes magic
//! version: u32           currently 1
//! manifest_len: u64      byte length of the JSON manifest
//! manifest               UTF-8 JSON, see [`CheckpointManifest`]
//! data                   every tensor's values as f64, in manifest order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context};
use hcfreq_core::config::RunConfig;
use hcfreq_core::data::NormStats;
use hcfreq_core::model::{Model, ModelConfig, ModelParams};
use hcfreq_core::Tensor;
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 8] = b"HCFQCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub role: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub config: RunConfig,
    pub channels: usize,
    pub channel_names: Vec<String>,
    /// Fitted on the training split; applied to any data evaluated later.
    pub norm: NormStats,
    pub best_epoch: usize,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub channel_names: Vec<String>,
    pub norm: NormStats,
    pub best_epoch: usize,
    pub model: Model,
}

impl Checkpoint {
    pub fn manifest(&self) -> CheckpointManifest {
        let roles = self.model.params.roles(&self.model.cfg.backbone);
        CheckpointManifest {
            config: self.config.clone(),
            channels: self.model.cfg.channels,
            channel_names: self.channel_names.clone(),
            norm: self.norm.clone(),
            best_epoch: self.best_epoch,
            tensors: roles
                .into_iter()
                .zip(self.model.params.iter())
                .map(|(role, t)| TensorEntry {
                    role,
                    shape: t.shape().to_vec(),
                })
                .collect(),
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> anyhow::Result<()> {
        let manifest = serde_json::to_vec(&self.manifest())?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(manifest.len() as u64).to_le_bytes())?;
        w.write_all(&manifest)?;
        for t in self.model.params.iter() {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> anyhow::Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).context("reading checkpoint magic")?;
        ensure!(&magic == MAGIC, "not a checkpoint (bad magic)");
        let mut u32b = [0u8; 4];
        r.read_exact(&mut u32b)?;
        let version = u32::from_le_bytes(u32b);
        ensure!(version == VERSION, "unsupported checkpoint version {version}");
        let mut u64b = [0u8; 8];
        r.read_exact(&mut u64b)?;
        let len = usize::try_from(u64::from_le_bytes(u64b))?;
        let mut manifest = vec![0u8; len];
        r.read_exact(&mut manifest).context("truncated checkpoint manifest")?;
        let m: CheckpointManifest = serde_json::from_slice(&manifest).context("parsing checkpoint manifest")?;

        let cfg = ModelConfig::from_run(&m.config, m.channels)?;
        let mut params = ModelParams::zeros(&cfg);
        let roles = params.roles(&cfg.backbone);
        ensure!(
            roles.len() == m.tensors.len(),
            "checkpoint lists {} tensors, config needs {}",
            m.tensors.len(),
            roles.len()
        );
        for ((t, role), entry) in params.iter_mut().zip(&roles).zip(&m.tensors) {
            if &entry.role != role || t.shape() != entry.shape.as_slice() {
                bail!(
                    "checkpoint tensor {} {:?} does not match expected {} {:?}",
                    entry.role,
                    entry.shape,
                    role,
                    t.shape()
                );
            }
            for v in t.data_mut() {
                r.read_exact(&mut u64b).with_context(|| format!("truncated data for {role}"))?;
                *v = f64::from_le_bytes(u64b);
            }
        }
        ensure!(r.read(&mut [0u8; 1])? == 0, "trailing bytes after checkpoint data");
        Ok(Self {
            config: m.config,
            channel_names: m.channel_names,
            norm: m.norm,
            best_epoch: m.best_epoch,
            model: Model::new(cfg, params)?,
        })
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(std::io::BufReader::new(f)).with_context(|| format!("loading {}", path.display()))
    }
}

/// Parameter tensors in checkpoint order, for callers that only need values.
pub fn tensors(model: &Model) -> Vec<&Tensor> {
    model.params.iter().collect()
}
