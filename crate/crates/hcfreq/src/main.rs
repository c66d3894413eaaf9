use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hcfreq::ablate::{run_sweep, SweepKind};
use hcfreq::config_file;
use hcfreq::core::conformance;
use hcfreq::core::data::{synth_corpus, SynthKind};
use hcfreq::csv_io::write_dataset;
use hcfreq::manifest::out_root;
use hcfreq::pipeline::{eval_run, train_run, Split};
use hcfreq::report;

/// Windowed-spectrum hyper-complex MLP forecaster.
#[derive(Parser)]
#[command(version = hcfreq::manifest::version(), propagate_version = true)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML config, or a run manifest to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; defaults to $HCFREQ_OUT_ROOT, then ./runs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel sub-runs for sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Config override `key=value`; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model and write checkpoint, metrics log and manifest.
    Train,
    /// Score a checkpoint per horizon and write its predictions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV to evaluate instead of the checkpoint's own data source.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Horizon prefixes to score; defaults to the full horizon.
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
    },
    /// Sweep one factor of the config.
    Ablate {
        #[arg(long, value_enum)]
        sweep: SweepKind,
        /// Comma-separated values; defaults depend on the sweep.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Compare printed product displays and the STFT against references.
    Conformance {
        /// Random pairs per table.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Random STFT plans in addition to the benchmark presets.
        #[arg(long, default_value_t = 20)]
        plans: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a synthetic corpus as CSV.
    Synth {
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        /// Destination file; standard output when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(c: &Common) -> anyhow::Result<hcfreq::core::config::RunConfig> {
    config_file::load(c.config.as_deref(), &c.set, c.seed)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let c = &cli.common;
    let root = out_root(c.out.as_deref());
    match cli.cmd {
        Cmd::Train => {
            let cfg = load_config(c)?;
            let out = train_run(&cfg, &root, &mut |m| {
                println!(
                    "epoch {:>3}  lr {:.3e}  train_loss {:.6}  val_mae {:.6}  val_rmse {:.6}",
                    m.epoch, m.lr, m.train_loss, m.val_mae, m.val_rmse
                );
            })?;
            println!(
                "best epoch {}  val_mae {:.6}  test_mae {:.6}  test_rmse {:.6}",
                out.best_epoch, out.val.mae, out.test.mae, out.test.rmse
            );
            println!("run directory: {}", out.run_dir.display());
        }
        Cmd::Eval {
            checkpoint,
            data,
            split,
            horizons,
        } => {
            let out = eval_run(&checkpoint, data.as_deref(), split, &horizons, &root)?;
            print!("{}", report::horizons_text(&out.rows));
            println!("{} windows, {} prediction rows", out.windows, out.prediction_rows);
            println!("run directory: {}", out.run_dir.display());
        }
        Cmd::Ablate { sweep, values } => {
            let cfg = load_config(c)?;
            let values = if values.is_empty() { sweep.default_values() } else { values };
            let workers = c
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rep = run_sweep(&cfg, sweep, &values, &root, workers)?;
            print!("{}", report::ablation_text(&rep.rows));
            println!("report: {}", rep.dir.join(hcfreq::manifest::ABLATION_FILE).display());
            if rep.failures() > 0 {
                eprintln!("{} of {} sub-runs failed", rep.failures(), rep.rows.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Conformance { samples, plans, json } => {
            let rep = conformance::run(samples, plans, c.seed.unwrap_or(0))?;
            print!("{}", report::conformance_text(&rep));
            if let Some(p) = json {
                std::fs::write(&p, serde_json::to_string_pretty(&rep)?).with_context(|| format!("writing {}", p.display()))?;
            }
            if !rep.core_pass() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Synth {
            kind,
            length,
            channels,
            noise,
            output,
        } => {
            let mut cfg = load_config(c)?;
            if let Some(k) = kind {
                cfg.synth_kind = SynthKind::parse(&k)?;
            }
            cfg.synth_length = length.unwrap_or(cfg.synth_length);
            cfg.synth_channels = channels.unwrap_or(cfg.synth_channels);
            cfg.synth_noise = noise.unwrap_or(cfg.synth_noise);
            if let Some(s) = c.seed {
                cfg.synth_seed = s;
            }
            let corpus = synth_corpus(&cfg.synth_spec())?;
            let stamps = hourly_stamps(corpus.dataset.timesteps());
            match output {
                Some(p) => write_to(&p, |w| write_dataset(&corpus.dataset, Some(&stamps), w))?,
                None => write_dataset(&corpus.dataset, Some(&stamps), std::io::stdout().lock())?,
            }
            if let Some(period) = corpus.period {
                eprintln!("fundamental period: {period}");
            }
            if !corpus.change_points.is_empty() {
                eprintln!("change points: {:?}", corpus.change_points);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_to(p: &Path, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let file = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Hourly timestamps from 2000-01-01, in the style of common benchmark files.
fn hourly_stamps(n: usize) -> Vec<String> {
    let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    (0..n)
        .map(|i| (start + chrono::Duration::hours(i as i64)).format("%Y-%m-%d %H:%M:%S").to_string())
        .collect()
}
