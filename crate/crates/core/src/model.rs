//! The full forecaster.
//!
//! ```text
//! x [B,L,D] ─ embed ─► X_E [B,L,D,E] ─ stft ─► p windows ─ top-M ─► backbone
//!                         │                                           │
//!                         │          X_Rec ◄─ istft ◄─ zero-pad ◄─────┘
//!                         └──────────► + ─► per-channel head (L·E → H → T) ─► [B,T,D]
//! ```

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::backbone::{forward_tape, BackboneParams, BackboneSpec, Planes};
use crate::config::{MaskMode, RunConfig};
use crate::error::{config_err, contract, Result};
use crate::select::select_indices;
use crate::spectral::{plan_stft, StftPlan, WindowFn};
use crate::tape::{GradTape, Var};
use crate::tensor::Tensor;

/// Resolved model hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub channels: usize,
    pub embed: usize,
    pub hidden: usize,
    pub windows: usize,
    pub nfft: usize,
    pub window_fn: WindowFn,
    pub top_m: usize,
    pub backbone: BackboneSpec,
    pub mask: MaskMode,
}

impl ModelConfig {
    pub fn from_run(cfg: &RunConfig, channels: usize) -> Result<Self> {
        cfg.validate()?;
        if let Some(d) = cfg.channels {
            if d != channels {
                return Err(config_err!("config expects {d} channels but the data has {channels}"));
            }
        }
        let out = Self {
            lookback: cfg.lookback,
            horizon: cfg.horizon,
            channels,
            embed: cfg.embed,
            hidden: cfg.hidden,
            windows: cfg.windows,
            nfft: cfg.nfft,
            window_fn: cfg.window_fn,
            top_m: cfg.top_m.resolve(cfg.bins()),
            backbone: cfg.backbone_spec(),
            mask: cfg.mask,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn plan(&self) -> Result<StftPlan> {
        plan_stft(self.lookback, self.windows, self.nfft, self.window_fn)
    }

    pub fn bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.plan()?;
        self.backbone.validate()?;
        if self.backbone.windows != self.windows || self.backbone.embed != self.embed {
            return Err(config_err!("backbone layout does not match the window count or embedding size"));
        }
        if self.top_m == 0 || self.top_m > self.bins() {
            return Err(config_err!("top_m = {} must lie in 1..={}", self.top_m, self.bins()));
        }
        if self.channels == 0 || self.horizon == 0 || self.hidden == 0 {
            return Err(config_err!("channels, horizon and hidden must be positive"));
        }
        Ok(())
    }
}

/// All learnable tensors. Generic so the same layout holds values,
/// tape handles, gradients or optimiser moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// `[E]` scalar-to-embedding lift.
    pub phi: T,
    /// `[E]`
    pub embed_bias: T,
    pub backbone: BackboneParams<T>,
    /// `[L·E, H]`
    pub head_w1: T,
    /// `[H]`
    pub head_b1: T,
    /// `[H, T]`
    pub head_w2: T,
    /// `[T]`
    pub head_b2: T,
}

impl<T> ModelParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ModelParams<U> {
        ModelParams {
            phi: f(&self.phi),
            embed_bias: f(&self.embed_bias),
            backbone: self.backbone.map(&mut f),
            head_w1: f(&self.head_w1),
            head_b1: f(&self.head_b1),
            head_w2: f(&self.head_w2),
            head_b2: f(&self.head_b2),
        }
    }

    /// Canonical order, matching [`Self::roles`].
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        [&self.phi, &self.embed_bias]
            .into_iter()
            .chain(self.backbone.iter())
            .chain([&self.head_w1, &self.head_b1, &self.head_w2, &self.head_b2])
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        [&mut self.phi, &mut self.embed_bias]
            .into_iter()
            .chain(self.backbone.iter_mut())
            .chain([
                &mut self.head_w1,
                &mut self.head_b1,
                &mut self.head_w2,
                &mut self.head_b2,
            ])
    }

    /// Tensor names in canonical order.
    pub fn roles(&self, spec: &BackboneSpec) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        out.push("embed.phi".into());
        out.push("embed.bias".into());
        for k in 0..self.backbone.weights.len() {
            let r = spec.weight_role(k);
            out.push(format!("backbone.{r}.re"));
            out.push(format!("backbone.{r}.im"));
        }
        for k in 0..self.backbone.biases.len() {
            out.push(format!("backbone.b{}.re", k + 1));
            out.push(format!("backbone.b{}.im", k + 1));
        }
        for r in ["head.w1", "head.b1", "head.w2", "head.b2"] {
            out.push(r.into());
        }
        out
    }

    /// Which tensors the mask pins to zero, in canonical order.
    pub fn masked(&self, mask: MaskMode) -> Vec<bool> {
        let mut out = Vec::new();
        out.extend([false, false]);
        for _ in &self.backbone.weights {
            out.push(mask.weight_real());
            out.push(mask.weight_imag());
        }
        for _ in &self.backbone.biases {
            out.extend([false, false]);
        }
        out.extend([false; 4]);
        out
    }
}

impl ModelParams<Tensor> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (l, e, h, t) = (cfg.lookback, cfg.embed, cfg.hidden, cfg.horizon);
        Self {
            phi: Tensor::zeros(&[e]),
            embed_bias: Tensor::zeros(&[e]),
            backbone: BackboneParams::zeros(&cfg.backbone),
            head_w1: Tensor::zeros(&[l * e, h]),
            head_b1: Tensor::zeros(&[h]),
            head_w2: Tensor::zeros(&[h, t]),
            head_b2: Tensor::zeros(&[t]),
        }
    }

    /// `φ` uniform in `±1`, backbone weights in `±1/√E`, head weights in
    /// `±1/√fan_in`; every bias zero. Masked weights start at zero.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(cfg);
        fill_uniform(&mut p.phi, 1.0, rng);
        p.backbone = BackboneParams::init(&cfg.backbone, rng);
        fill_uniform(&mut p.head_w1, 1.0 / libm::sqrt((cfg.lookback * cfg.embed) as f64), rng);
        fill_uniform(&mut p.head_w2, 1.0 / libm::sqrt(cfg.hidden as f64), rng);
        p.apply_mask(cfg.mask);
        p
    }

    pub fn apply_mask(&mut self, mask: MaskMode) {
        let flags = self.masked(mask);
        for (t, m) in self.iter_mut().zip(flags) {
            if m {
                t.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let want = Self::zeros(cfg);
        let roles = want.roles(&cfg.backbone);
        if self.iter().count() != roles.len() {
            return Err(contract!(
                "parameter set has {} tensors, the model needs {}",
                self.iter().count(),
                roles.len()
            ));
        }
        for ((a, b), role) in self.iter().zip(want.iter()).zip(&roles) {
            if a.shape() != b.shape() {
                return Err(contract!("{role}: shape {:?}, expected {:?}", a.shape(), b.shape()));
            }
        }
        Ok(())
    }

    pub fn numel(&self) -> usize {
        self.iter().map(Tensor::numel).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(Tensor::is_finite)
    }
}

fn fill_uniform<R: Rng + ?Sized>(t: &mut Tensor, bound: f64, rng: &mut R) {
    t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-bound..=bound));
}

/// Handles of the interesting intermediates of one recorded forward pass.
#[derive(Debug, Clone)]
pub struct ForwardVars {
    /// `[B, L, D, E]`
    pub embedded: Var,
    /// Per window, the kept coefficients `[B, M, D, E]` after input masking.
    pub selected: Vec<Planes<Var>>,
    /// `[B, L, D, E]`
    pub reconstructed: Var,
    /// `[B, L, D, E]`, the skip sum fed to the head.
    pub head_input: Var,
    /// `[B, T, D]`
    pub output: Var,
}

/// Records the forward pass for `x: [B, L, D]`. Masked backbone weights are
/// replaced by zero constants, so no gradient reaches them.
pub fn record_forward(
    cfg: &ModelConfig,
    plan: &StftPlan,
    tape: &mut GradTape,
    params: &ModelParams<Var>,
    x: Var,
) -> Result<ForwardVars> {
    let (b, l, d) = match *tape.shape(x) {
        [b, l, d] if l == cfg.lookback && d == cfg.channels => (b, l, d),
        _ => {
            return Err(contract!(
                "input {:?} does not match [B, {}, {}]",
                tape.shape(x),
                cfg.lookback,
                cfg.channels
            ))
        }
    };
    let e = cfg.embed;

    let embedded = (|| {
        let v = tape.outer(x, params.phi)?;
        tape.add_bias(v, params.embed_bias)
    })()
    .map_err(|err| err.in_stage("embed"))?;

    let spec = tape.stft(embedded, plan).map_err(|err| err.in_stage("stft"))?;

    let bins = plan.bins();
    let mut kept = Vec::with_capacity(cfg.windows);
    let mut indices = Vec::with_capacity(cfg.windows);
    (|| -> Result<()> {
        for w in 0..cfg.windows {
            let re = tape.take(spec, 2 * w)?;
            let im = tape.take(spec, 2 * w + 1)?;
            let idx = Arc::new(select_indices(
                tape.value(re).data(),
                tape.value(im).data(),
                [b, bins, d, e],
                cfg.top_m,
            ));
            let mut re = tape.gather_bins(re, idx.clone())?;
            let mut im = tape.gather_bins(im, idx.clone())?;
            if cfg.mask.input_real() {
                re = tape.leaf(Tensor::zeros(tape.shape(re)));
            }
            if cfg.mask.input_imag() {
                im = tape.leaf(Tensor::zeros(tape.shape(im)));
            }
            kept.push(Planes { re, im });
            indices.push(idx);
        }
        Ok(())
    })()
    .map_err(|err| err.in_stage("top-M selection"))?;

    let mixed = (|| {
        let mut bp = params.backbone.clone();
        for w in &mut bp.weights {
            if cfg.mask.weight_real() {
                w.re = tape.leaf(Tensor::zeros(tape.shape(w.re)));
            }
            if cfg.mask.weight_imag() {
                w.im = tape.leaf(Tensor::zeros(tape.shape(w.im)));
            }
        }
        forward_tape(&cfg.backbone, tape, &bp, &kept)
    })()
    .map_err(|err| err.in_stage("backbone"))?;

    let reconstructed = (|| {
        let mut planes = Vec::with_capacity(2 * cfg.windows);
        for (w, idx) in mixed.iter().zip(&indices) {
            planes.push(tape.scatter_bins(w.re, idx.clone(), bins)?);
            planes.push(tape.scatter_bins(w.im, idx.clone(), bins)?);
        }
        let full = tape.stack(&planes)?;
        tape.istft(full, plan)
    })()
    .map_err(|err| err.in_stage("istft"))?;

    let (head_input, output) = (|| {
        let s = tape.add(reconstructed, embedded)?;
        let h = tape.permute(s, &[0, 2, 1, 3])?;
        let h = tape.reshape(h, &[b, d, l * e])?;
        let h = tape.matmul(h, params.head_w1)?;
        let h = tape.add_bias(h, params.head_b1)?;
        let h = tape.relu(h);
        let h = tape.matmul(h, params.head_w2)?;
        let h = tape.add_bias(h, params.head_b2)?;
        Ok((s, tape.permute(h, &[0, 2, 1])?))
    })()
    .map_err(|err: crate::Error| err.in_stage("head"))?;

    Ok(ForwardVars {
        embedded,
        selected: kept,
        reconstructed,
        head_input,
        output,
    })
}

/// Intermediates of an eager forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub embedded: Tensor,
    pub selected: Vec<Planes<Tensor>>,
    pub reconstructed: Tensor,
    pub head_input: Tensor,
    pub output: Tensor,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub plan: StftPlan,
    pub params: ModelParams<Tensor>,
}

impl Model {
    pub fn new(cfg: ModelConfig, params: ModelParams<Tensor>) -> Result<Self> {
        cfg.validate()?;
        params.check_shapes(&cfg)?;
        Ok(Self {
            plan: cfg.plan()?,
            cfg,
            params,
        })
    }

    pub fn init<R: Rng + ?Sized>(cfg: ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let params = ModelParams::init(&cfg, rng);
        Self::new(cfg, params)
    }

    pub fn trace(&self, x: &Tensor) -> Result<ForwardTrace> {
        let mut tape = GradTape::new();
        let p = self.params.map(|t| tape.leaf(t.clone()));
        let xv = tape.leaf(x.clone());
        let v = record_forward(&self.cfg, &self.plan, &mut tape, &p, xv)?;
        Ok(ForwardTrace {
            embedded: tape.value(v.embedded).clone(),
            selected: v.selected.iter().map(|p| p.map(|&x| tape.value(x).clone())).collect(),
            reconstructed: tape.value(v.reconstructed).clone(),
            head_input: tape.value(v.head_input).clone(),
            output: tape.value(v.output).clone(),
        })
    }

    /// `[B, L, D] → [B, T, D]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.trace(x)?.output)
    }

    /// Mean squared error on one batch and its gradient for every tensor.
    pub fn loss_and_grad(&self, x: &Tensor, y: &Tensor) -> Result<(f64, ModelParams<Tensor>)> {
        let mut tape = GradTape::new();
        let p = self.params.map(|t| tape.leaf(t.clone()));
        let xv = tape.leaf(x.clone());
        let yv = tape.leaf(y.clone());
        let out = record_forward(&self.cfg, &self.plan, &mut tape, &p, xv)?.output;
        let loss = tape.mse(out, yv).map_err(|e| e.in_stage("loss"))?;
        let value = tape.value(loss).data()[0];
        let grads = tape.backward(loss)?;
        Ok((value, p.map(|v| grads.get(*v))))
    }
}

/// Worst analytic-vs-numeric disagreement for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub role: String,
    pub max_abs_err: f64,
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
    pub max_rel_err: f64,
}

/// Compares every gradient entry with a central difference of step `h`.
pub fn check_gradients(model: &Model, x: &Tensor, y: &Tensor, h: f64) -> Result<Vec<GradCheck>> {
    let (_, grads) = model.loss_and_grad(x, y)?;
    let roles = model.params.roles(&model.cfg.backbone);
    let loss_at = |params: &ModelParams<Tensor>| -> Result<f64> {
        let m = Model::new(model.cfg.clone(), params.clone())?;
        let out = m.forward(x)?;
        Ok(crate::data::metrics(&out, y)?.mse)
    };
    fn slot(p: &mut ModelParams<Tensor>, k: usize) -> &mut Tensor {
        p.iter_mut().nth(k).expect("same layout")
    }
    let mut probe = model.params.clone();
    let mut out = Vec::with_capacity(roles.len());
    for (k, (g, role)) in grads.iter().zip(roles).enumerate() {
        let (mut abs, mut rel) = (0.0f64, 0.0f64);
        for i in 0..g.numel() {
            let orig = slot(&mut probe, k).data()[i];
            slot(&mut probe, k).data_mut()[i] = orig + h;
            let plus = loss_at(&probe)?;
            slot(&mut probe, k).data_mut()[i] = orig - h;
            let minus = loss_at(&probe)?;
            slot(&mut probe, k).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = g.data()[i];
            let diff = (analytic - numeric).abs();
            abs = abs.max(diff);
            rel = rel.max(diff / analytic.abs().max(numeric.abs()).max(1e-6));
        }
        out.push(GradCheck {
            role,
            max_abs_err: abs,
            max_rel_err: rel,
        });
    }
    Ok(out)
}

/// `x·φ + b` lifted over a trailing embedding axis.
pub fn embed(x: &Tensor, phi: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let mut tape = GradTape::new();
    let (xv, pv, bv) = (tape.leaf(x.clone()), tape.leaf(phi.clone()), tape.leaf(bias.clone()));
    let o = tape.outer(xv, pv)?;
    let o = tape.add_bias(o, bv)?;
    Ok(tape.value(o).clone())
}
