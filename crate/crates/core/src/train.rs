//! Loss, Adam, the per-epoch learning-rate decay and the fit/evaluate loops.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{Metrics, MetricsAccumulator, WindowSet};
use crate::error::{config_err, contract, Result};
use crate::model::{Model, ModelConfig, ModelParams};
use crate::tensor::Tensor;
use crate::Error;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Mean of squared differences.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(contract!("mse: shapes {:?} and {:?} differ", pred.shape(), target.shape()));
    }
    let n = pred.numel().max(1) as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n)
}

/// Bias-corrected Adam over a fixed list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<'a>(lr: f64, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (m, v): (Vec<_>, Vec<_>) = params
            .into_iter()
            .map(|t| (vec![0.0; t.numel()], vec![0.0; t.numel()]))
            .unzip();
        Self {
            lr,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            m,
            v,
        }
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One update. `roles` names the tensors for diagnostics; a non-finite
    /// gradient aborts before anything is modified.
    pub fn update<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Tensor>,
        grads: impl IntoIterator<Item = &'a Tensor>,
        roles: &[String],
    ) -> Result<()> {
        let mut params: Vec<&mut Tensor> = params.into_iter().collect();
        let grads: Vec<&Tensor> = grads.into_iter().collect();
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(contract!(
                "optimiser tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            ));
        }
        for (k, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.numel() != self.m[k].len() || g.numel() != self.m[k].len() {
                return Err(contract!("tensor {k} changed size since the optimiser was built"));
            }
            if let Some(i) = g.data().iter().position(|v| !v.is_finite()) {
                let name = roles.get(k).map_or_else(|| format!("#{k}"), String::clone);
                return Err(Error::NonFinite(format!(
                    "gradient of {name} is {} at element {i} (step {})",
                    g.data()[i],
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for ((w, &gi), (mi, vi)) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut().zip(v.iter_mut())) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= self.lr * mhat / (libm::sqrt(vhat) + self.eps);
            }
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// Zero-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_mae: f64,
    pub val_rmse: f64,
}

/// Training hyperparameters pulled out of a [`RunConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub seed: u64,
}

impl From<&RunConfig> for FitOptions {
    fn from(c: &RunConfig) -> Self {
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            lr: c.lr,
            lr_decay: c.lr_decay,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters from the epoch with the lowest validation MAE.
    pub model: Model,
    pub best_epoch: usize,
    pub log: Vec<EpochMetrics>,
}

/// RNG stream for parameter initialisation; batch shuffling uses stream 1.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

/// Initialises a model from `seed` and trains it.
pub fn fit(
    cfg: ModelConfig,
    train: &WindowSet,
    val: &WindowSet,
    opts: &FitOptions,
    on_epoch: &mut dyn FnMut(&EpochMetrics, &Model),
) -> Result<FitResult> {
    let model = Model::init(cfg, &mut init_rng(opts.seed))?;
    fit_from(model, train, val, opts, on_epoch)
}

/// Trains an existing model.
pub fn fit_from(
    mut model: Model,
    train: &WindowSet,
    val: &WindowSet,
    opts: &FitOptions,
    on_epoch: &mut dyn FnMut(&EpochMetrics, &Model),
) -> Result<FitResult> {
    if train.is_empty() || val.is_empty() {
        return Err(config_err!(
            "training needs samples in both splits (train {}, validation {})",
            train.len(),
            val.len()
        ));
    }
    if opts.batch_size == 0 || opts.epochs == 0 {
        return Err(config_err!("batch_size and epochs must be positive"));
    }
    let roles = model.params.roles(&model.cfg.backbone);
    let mut adam = Adam::new(opts.lr, model.params.iter());
    let mut rng = shuffle_rng(opts.seed);
    let mut log = Vec::with_capacity(opts.epochs);
    let mut best: Option<(f64, usize, ModelParams<Tensor>)> = None;
    let mut lr = opts.lr;
    for epoch in 0..opts.epochs {
        adam.lr = lr;
        let mut batches = train.batches(opts.batch_size);
        batches.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for (bi, idx) in batches.iter().enumerate() {
            let (x, y) = train.batch(idx)?;
            let (loss, grads) = model.loss_and_grad(&x, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss is {loss} in epoch {epoch}, batch {bi}")));
            }
            adam.update(model.params.iter_mut(), grads.iter(), &roles)?;
            total += loss * idx.len() as f64;
            count += idx.len();
        }
        if !model.params.is_finite() {
            return Err(Error::NonFinite(format!("parameters left finite range in epoch {epoch}")));
        }
        let vm = evaluate(&model, val, opts.batch_size)?;
        let rec = EpochMetrics {
            epoch,
            lr,
            train_loss: total / count as f64,
            val_mae: vm.mae,
            val_rmse: vm.rmse,
        };
        on_epoch(&rec, &model);
        log.push(rec);
        if best.as_ref().map_or(true, |b| vm.mae < b.0) {
            best = Some((vm.mae, epoch, model.params.clone()));
        }
        lr *= opts.lr_decay;
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    model.params = params;
    Ok(FitResult {
        model,
        best_epoch,
        log,
    })
}

/// Metrics over every sample of `ws`, in chronological batches.
pub fn evaluate(model: &Model, ws: &WindowSet, batch_size: usize) -> Result<Metrics> {
    evaluate_horizon(model, ws, batch_size, model.cfg.horizon)
}

/// Like [`evaluate`] but scoring only the first `h` forecast steps.
pub fn evaluate_horizon(model: &Model, ws: &WindowSet, batch_size: usize, h: usize) -> Result<Metrics> {
    let t = model.cfg.horizon;
    if h == 0 || h > t {
        return Err(config_err!("evaluation horizon {h} must lie in 1..={t}"));
    }
    let d = model.cfg.channels;
    let mut acc = MetricsAccumulator::default();
    for idx in ws.batches(batch_size) {
        let (x, y) = ws.batch(&idx)?;
        let pred = model.forward(&x)?;
        for b in 0..idx.len() {
            let o = b * t * d;
            acc.push(&pred.data()[o..o + h * d], &y.data()[o..o + h * d]);
        }
    }
    acc.finish()
}
