//! Run directories and the manifest written into each.

use std::path::{Path, PathBuf};

use anyhow::Context;
use hcfreq_core::config::RunConfig;
use hcfreq_core::data::{Metrics, SynthSpec};
use serde::{Deserialize, Serialize};

use crate::config_file::config_hash;

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "HCFREQ_OUT_ROOT";
pub const DEFAULT_OUT_ROOT: &str = "runs";
pub const MANIFEST_FORMAT: &str = "hcfreq-run/1";

pub const CHECKPOINT_FILE: &str = "checkpoint.hcfq";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const HORIZONS_FILE: &str = "horizons.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

/// `git describe` of the build when available, else the package version.
pub fn version() -> &'static str {
    env!("HCFREQ_VERSION")
}

/// `--out` when given, then the environment variable, then `./runs`.
pub fn out_root(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

/// Creates `<root>/<prefix><UTC timestamp>-<config hash>`, adding a numeric
/// suffix if that name is taken.
pub fn create_run_dir(root: &Path, prefix: &str, cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let base = format!("{prefix}{stamp}-{}", config_hash(cfg));
    for i in 0.. {
        let name = if i == 0 { base.clone() } else { format!("{base}-{i}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    /// `"csv"` or `"synth"`.
    pub source: String,
    pub path: Option<String>,
    pub synth: Option<SynthSpec>,
    pub timesteps: usize,
    pub channel_names: Vec<String>,
    pub split_sizes: [usize; 3],
    /// Channels whose training range was empty; they normalise to 0.
    pub degenerate_channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seed: u64,
    pub data: DataRecord,
    /// RFC 3339, UTC.
    pub started_at: String,
    pub wall_time_s: f64,
    pub best_epoch: Option<usize>,
    pub val: Option<Metrics>,
    pub test: Option<Metrics>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, data: DataRecord) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            command: command.into(),
            version: version().into(),
            config_hash: config_hash(config),
            seed: config.seed,
            config: config.clone(),
            data,
            started_at: chrono::Utc::now().to_rfc3339(),
            wall_time_s: 0.0,
            best_epoch: None,
            val: None,
            test: None,
            artifacts: Vec::new(),
        }
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
