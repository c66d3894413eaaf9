//! Data preparation and the train / eval runs behind the command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context};
use hcfreq_core::config::RunConfig;
use hcfreq_core::data::{
    make_windows, split_chronological, synth_corpus, window_count, Dataset, Metrics, NormStats, Series, WindowSet,
};
use hcfreq_core::model::ModelConfig;
use hcfreq_core::train::{evaluate, evaluate_horizon, fit, EpochMetrics, FitOptions};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config_file::to_toml;
use crate::csv_io::load_csv;
use crate::manifest::{
    create_run_dir, DataRecord, RunManifest, CHECKPOINT_FILE, CONFIG_FILE, HORIZONS_FILE, MANIFEST_FILE,
    METRICS_FILE, PREDICTIONS_FILE,
};

/// A loaded series with its optional timestamp column.
#[derive(Debug, Clone)]
pub struct Source {
    pub dataset: Dataset,
    pub timestamps: Option<Vec<String>>,
}

/// The CSV at `data_path`, or the configured synthetic corpus.
pub fn load_source(cfg: &RunConfig) -> anyhow::Result<Source> {
    match &cfg.data_path {
        Some(p) => {
            let t = load_csv(Path::new(p))?;
            Ok(Source {
                dataset: t.dataset,
                timestamps: t.timestamps,
            })
        }
        None => Ok(Source {
            dataset: synth_corpus(&cfg.synth_spec())?.dataset,
            timestamps: None,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "train" => Self::Train,
            "val" => Self::Val,
            "test" => Self::Test,
            _ => bail!("unknown split {s:?} (train, val, test)"),
        })
    }
}

/// Normalised splits cut into sliding windows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub norm: NormStats,
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
    pub record: DataRecord,
}

impl Prepared {
    pub fn windows(&self, s: Split) -> &WindowSet {
        match s {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Checks the config and its fit to the data together, reporting every
/// problem at once.
pub fn validate(cfg: &RunConfig, ds: &Dataset) -> anyhow::Result<()> {
    let mut issues = cfg.issues();
    if let Some(d) = cfg.channels {
        if d != ds.channels() {
            issues.push(format!("config expects {d} channels but the data has {}", ds.channels()));
        }
    }
    match hcfreq_core::data::split_sizes(ds.timesteps()) {
        Ok((a, b, c)) => {
            for (name, n) in [("train", a), ("validation", b), ("test", c)] {
                if cfg.stride > 0 && window_count(n, cfg.lookback, cfg.horizon, cfg.stride) == 0 {
                    issues.push(format!(
                        "{name} split has {n} rows, fewer than lookback + horizon = {}",
                        cfg.lookback + cfg.horizon
                    ));
                }
            }
        }
        Err(e) => issues.push(e.root().to_string()),
    }
    if issues.is_empty() {
        Ok(())
    } else {
        bail!("{} problem(s):\n  - {}", issues.len(), issues.join("\n  - "))
    }
}

fn normalized_windows(norm: &NormStats, s: &Series, cfg: &RunConfig) -> anyhow::Result<WindowSet> {
    Ok(make_windows(&norm.normalize(s)?, cfg.lookback, cfg.horizon, cfg.stride)?)
}

/// Splits, fits normalisation on the training split (or uses `norm`) and
/// windows every split.
pub fn prepare(cfg: &RunConfig, src: &Source, norm: Option<NormStats>) -> anyhow::Result<Prepared> {
    validate(cfg, &src.dataset)?;
    let ds = &src.dataset;
    let splits = split_chronological(ds)?;
    let norm = match norm {
        Some(n) => {
            ensure!(n.min.len() == ds.channels(), "normalisation has {} channels, data has {}", n.min.len(), ds.channels());
            n
        }
        None => NormStats::fit(&splits.train)?,
    };
    let degenerate: Vec<String> = norm.degenerate().into_iter().map(|c| ds.channel_names[c].clone()).collect();
    for c in &degenerate {
        log::warn!("channel {c:?} is constant on the training split; it normalises to 0");
    }
    Ok(Prepared {
        train: normalized_windows(&norm, &splits.train, cfg)?,
        val: normalized_windows(&norm, &splits.val, cfg)?,
        test: normalized_windows(&norm, &splits.test, cfg)?,
        record: DataRecord {
            source: if cfg.data_path.is_some() { "csv" } else { "synth" }.into(),
            path: cfg.data_path.clone(),
            synth: cfg.data_path.is_none().then(|| cfg.synth_spec()),
            timesteps: ds.timesteps(),
            channel_names: ds.channel_names.clone(),
            split_sizes: [splits.train.len(), splits.val.len(), splits.test.len()],
            degenerate_channels: degenerate,
        },
        norm,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub log: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub val: Metrics,
    pub test: Metrics,
    pub weight_matrices: usize,
}

/// Trains per `cfg` and writes checkpoint, metrics log, config and
/// manifest into a fresh run directory under `root`.
pub fn train_run(
    cfg: &RunConfig,
    root: &Path,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> anyhow::Result<TrainOutcome> {
    let started = Instant::now();
    let src = load_source(cfg)?;
    let prep = prepare(cfg, &src, None)?;
    let mcfg = ModelConfig::from_run(cfg, src.dataset.channels())?;
    let weight_matrices = cfg.backbone_spec().weight_matrices();

    let dir = create_run_dir(root, "", cfg)?;
    let mut manifest = RunManifest::new("train", cfg, prep.record.clone());
    std::fs::write(dir.join(CONFIG_FILE), to_toml(cfg)?)?;
    let mut log_file = BufWriter::new(File::create(dir.join(METRICS_FILE))?);
    let mut write_err: Option<std::io::Error> = None;
    let result = fit(mcfg, &prep.train, &prep.val, &FitOptions::from(cfg), &mut |m, _| {
        let line = serde_json::to_string(m).expect("metrics serialise");
        if let Err(e) = writeln!(log_file, "{line}").and_then(|_| log_file.flush()) {
            write_err.get_or_insert(e);
        }
        on_epoch(m);
    })
    .with_context(|| format!("training (run directory {})", dir.display()))?;
    if let Some(e) = write_err {
        return Err(e).context("writing metrics log");
    }
    drop(log_file);

    let val = evaluate(&result.model, &prep.val, cfg.batch_size)?;
    let test = evaluate(&result.model, &prep.test, cfg.batch_size)?;
    Checkpoint {
        config: cfg.clone(),
        channel_names: src.dataset.channel_names.clone(),
        norm: prep.norm.clone(),
        best_epoch: result.best_epoch,
        model: result.model,
    }
    .save(&dir.join(CHECKPOINT_FILE))?;

    manifest.best_epoch = Some(result.best_epoch);
    manifest.val = Some(val);
    manifest.test = Some(test);
    manifest.artifacts = [CHECKPOINT_FILE, METRICS_FILE, CONFIG_FILE, MANIFEST_FILE].map(String::from).to_vec();
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.save(&dir)?;
    Ok(TrainOutcome {
        run_dir: dir,
        log: result.log,
        best_epoch: result.best_epoch,
        val,
        test,
        weight_matrices,
    })
}

/// One line of the horizons table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub run_dir: PathBuf,
    pub rows: Vec<HorizonRow>,
    pub windows: usize,
    pub prediction_rows: usize,
}

/// Scores a checkpoint on one split at several horizon prefixes and writes
/// the horizons table and the per-window predictions.
///
/// `data` replaces the checkpoint's data source with a CSV file.
pub fn eval_run(
    checkpoint: &Path,
    data: Option<&Path>,
    split: Split,
    horizons: &[usize],
    root: &Path,
) -> anyhow::Result<EvalOutcome> {
    let started = Instant::now();
    let ck = Checkpoint::load(checkpoint)?;
    let mut cfg = ck.config.clone();
    if let Some(p) = data {
        cfg.data_path = Some(p.display().to_string());
    }
    let t = cfg.horizon;
    let horizons: Vec<usize> = if horizons.is_empty() { vec![t] } else { horizons.to_vec() };
    for &h in &horizons {
        ensure!(h >= 1 && h <= t, "horizon {h} is outside 1..={t}, the checkpoint's forecast length");
    }
    let src = load_source(&cfg)?;
    ensure!(
        src.dataset.channels() == ck.model.cfg.channels,
        "checkpoint was trained on {} channels ({}) but the data has {} ({})",
        ck.model.cfg.channels,
        ck.channel_names.join(", "),
        src.dataset.channels(),
        src.dataset.channel_names.join(", ")
    );
    let prep = prepare(&cfg, &src, Some(ck.norm.clone()))?;
    let ws = prep.windows(split);

    let dir = create_run_dir(root, "eval-", &cfg)?;
    let rows = horizons
        .iter()
        .map(|&h| {
            let m = evaluate_horizon(&ck.model, ws, cfg.batch_size, h)?;
            Ok(HorizonRow {
                horizon: h,
                mae: m.mae,
                rmse: m.rmse,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(dir.join(HORIZONS_FILE))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let prediction_rows = write_predictions(&ck, ws, &src, &dir.join(PREDICTIONS_FILE), cfg.batch_size)?;

    let mut manifest = RunManifest::new("eval", &cfg, prep.record.clone());
    manifest.best_epoch = Some(ck.best_epoch);
    manifest.artifacts = [HORIZONS_FILE, PREDICTIONS_FILE, MANIFEST_FILE].map(String::from).to_vec();
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.save(&dir)?;
    Ok(EvalOutcome {
        run_dir: dir,
        rows,
        windows: ws.len(),
        prediction_rows,
    })
}

/// Columns `window, step, timestamp, <ch>_true, <ch>_pred, ...`; one row
/// per forecast step of every window, values on the normalised scale.
/// `timestamp` is the source timestamp when the file had one, else the
/// absolute row index.
fn write_predictions(ck: &Checkpoint, ws: &WindowSet, src: &Source, path: &Path, batch: usize) -> anyhow::Result<usize> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["window".to_string(), "step".into(), "timestamp".into()];
    for c in &src.dataset.channel_names {
        header.push(format!("{c}_true"));
        header.push(format!("{c}_pred"));
    }
    w.write_record(&header)?;
    let (t, d) = (ws.horizon, ws.series.channels());
    let mut rows = 0;
    for idx in ws.batches(batch) {
        let (x, y) = ws.batch(&idx)?;
        let pred = ck.model.forward(&x)?;
        for (b, &i) in idx.iter().enumerate() {
            let first = ws.series.offset + ws.start(i) + ws.lookback;
            for s in 0..t {
                let row = first + s;
                let stamp = match &src.timestamps {
                    Some(ts) => ts[row].clone(),
                    None => row.to_string(),
                };
                let mut rec = vec![i.to_string(), s.to_string(), stamp];
                let o = (b * t + s) * d;
                for c in 0..d {
                    rec.push(y.data()[o + c].to_string());
                    rec.push(pred.data()[o + c].to_string());
                }
                w.write_record(&rec)?;
                rows += 1;
            }
        }
    }
    w.flush()?;
    Ok(rows)
}
