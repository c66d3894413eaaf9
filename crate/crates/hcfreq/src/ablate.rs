//! One-factor sweeps over a base config.
//!
//! Every sweep value becomes one seeded training run in its own directory;
//! runs execute on a bounded worker pool and a failed run is recorded
//! without stopping the others. The report is long format, one row per
//! value, with test-split metrics of the best validation epoch.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use hcfreq_core::backbone::{count_weight_matrices, BackboneKind};
use hcfreq_core::config::{MaskMode, RunConfig, TopM};
use hcfreq_core::spectral::scaled_nfft;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_file::to_toml;
use crate::manifest::{create_run_dir, ABLATION_FILE, CONFIG_FILE};
use crate::pipeline::train_run;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    #[value(name = "top_m")]
    TopM,
    Lookback,
    Mask,
    Backbone,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::TopM => "top_m",
            Self::Lookback => "lookback",
            Self::Mask => "mask",
            Self::Backbone => "backbone",
        }
    }

    /// Used when the caller gives no values.
    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            Self::TopM => &["1", "2", "4", "max"],
            Self::Lookback => &["48", "96", "192", "336"],
            Self::Mask => return MaskMode::ALL.iter().map(|m| m.name().to_string()).collect(),
            Self::Backbone => return BackboneKind::ALL.iter().map(|k| k.name().to_string()).collect(),
        };
        v.iter().map(|s| s.to_string()).collect()
    }

    /// `base` with this factor set to `value`. A lookback change rescales
    /// N_FFT to keep its ratio to the lookback as close as the tiling
    /// allows.
    pub fn apply(self, base: &RunConfig, value: &str) -> anyhow::Result<RunConfig> {
        let mut cfg = base.clone();
        match self {
            Self::TopM => {
                cfg.top_m = match value {
                    "max" => TopM::Max,
                    n => TopM::Count(n.parse().with_context(|| format!("top_m value {n:?}"))?),
                }
            }
            Self::Lookback => {
                let l: usize = value.parse().with_context(|| format!("lookback value {value:?}"))?;
                let ratio = base.nfft as f64 / base.lookback as f64;
                cfg.lookback = l;
                cfg.nfft = scaled_nfft(l, base.windows, ratio)
                    .ok_or_else(|| anyhow!("no valid N_FFT for lookback {l} with {} windows", base.windows))?;
            }
            Self::Mask => cfg.mask = MaskMode::parse(value)?,
            Self::Backbone => cfg.backbone = BackboneKind::parse(value)?,
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub sweep: String,
    pub sweep_value: String,
    /// `ok` or `failed`.
    pub status: String,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub val_mae: Option<f64>,
    pub best_epoch: Option<usize>,
    pub weight_matrices: usize,
    pub run_dir: Option<String>,
    pub error: Option<String>,
}

impl AblationRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub dir: PathBuf,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }
}

fn run_one(kind: SweepKind, base: &RunConfig, value: &str, runs: &Path) -> AblationRow {
    let mut row = AblationRow {
        sweep: kind.name().into(),
        sweep_value: value.into(),
        status: "failed".into(),
        mae: None,
        rmse: None,
        val_mae: None,
        best_epoch: None,
        weight_matrices: count_weight_matrices(base.backbone, base.windows, base.radius),
        run_dir: None,
        error: None,
    };
    let res = kind.apply(base, value).and_then(|cfg| {
        row.weight_matrices = count_weight_matrices(cfg.backbone, cfg.windows, cfg.radius);
        train_run(&cfg, runs, &mut |_| {})
    });
    match res {
        Ok(out) => {
            row.status = "ok".into();
            row.mae = Some(out.test.mae);
            row.rmse = Some(out.test.rmse);
            row.val_mae = Some(out.val.mae);
            row.best_epoch = Some(out.best_epoch);
            row.run_dir = Some(out.run_dir.display().to_string());
        }
        Err(e) => row.error = Some(format!("{e:#}")),
    }
    row
}

/// Runs the sweep under a new `ablate-<kind>-...` directory in `root`
/// using at most `workers` threads, and writes the report there.
pub fn run_sweep(
    base: &RunConfig,
    kind: SweepKind,
    values: &[String],
    root: &Path,
    workers: usize,
) -> anyhow::Result<AblationReport> {
    if values.is_empty() {
        bail!("the sweep has no values");
    }
    let dir = create_run_dir(root, &format!("ablate-{}-", kind.name()), base)?;
    std::fs::write(dir.join(CONFIG_FILE), to_toml(base)?)?;
    let runs = dir.join("runs");
    std::fs::create_dir_all(&runs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;
    let rows: Vec<AblationRow> = pool.install(|| values.par_iter().map(|v| run_one(kind, base, v, &runs)).collect());
    let mut w = csv::Writer::from_path(dir.join(ABLATION_FILE))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(AblationReport { dir, rows })
}
