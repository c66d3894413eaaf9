//! Frequency-domain MLP backbones over compressed complex windows.
//!
//! All four kinds act on `p` windows of shape `[B, M, D, E]` and multiply
//! along the embedding axis only, so one `E×E` complex matrix is shared by
//! every bin and channel. Complex products are expanded into real matrix
//! products on the tape:
//!
//! ```text
//! (xr + j xi)(wr + j wi) = (xr wr - xi wi) + j (xr wi + xi wr)
//! ```
//!
//! | kind    | mixing                                  | weight matrices     |
//! |---------|-----------------------------------------|---------------------|
//! | `fd`    | none, one layer shared by every window  | 1                   |
//! | `wm`    | neighbours within radius `R`            | `(2R+1)p - R(R+1)`  |
//! | `hc`    | one hyper-complex product of base `2p`  | `p`                 |
//! | `basic` | all-to-all                              | `p²`                |

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, contract, Result};
use crate::hc::table::ProductTable;
use crate::hc::Base;
use crate::select::CompressedWindows;
use crate::tape::{GradTape, Var};
use crate::tensor::{ComplexTensor, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    Fd,
    Wm,
    Hc,
    Basic,
}

impl BackboneKind {
    pub const ALL: [BackboneKind; 4] = [Self::Fd, Self::Wm, Self::Hc, Self::Basic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fd => "fd",
            Self::Wm => "wm",
            Self::Hc => "hc",
            Self::Basic => "basic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_err!("unknown backbone {s:?}; expected one of fd, wm, hc, basic"))
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Applied to the real and imaginary planes separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Self::Relu => v.max(0.0),
            Self::Identity => v,
        }
    }
}

/// Complex-matrix count of a backbone over `p` windows.
pub fn count_weight_matrices(kind: BackboneKind, p: usize, radius: usize) -> usize {
    match kind {
        BackboneKind::Fd => 1,
        BackboneKind::Hc => p,
        BackboneKind::Basic => p * p,
        BackboneKind::Wm => wm_links(p, radius).len(),
    }
}

/// A source→target window pair carrying its own weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub src: usize,
    pub dst: usize,
}

fn wm_links(p: usize, radius: usize) -> Vec<Link> {
    let mut out = Vec::new();
    for dst in 0..p {
        let lo = dst.saturating_sub(radius);
        let hi = (dst + radius).min(p.saturating_sub(1));
        out.extend((lo..=hi).map(|src| Link { src, dst }));
    }
    out
}

fn all_links(p: usize) -> Vec<Link> {
    (0..p).flat_map(|dst| (0..p).map(move |src| Link { src, dst })).collect()
}

/// Structural description of a backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackboneSpec {
    pub kind: BackboneKind,
    pub windows: usize,
    pub embed: usize,
    /// Neighbour radius; only read by `wm`.
    pub radius: usize,
    /// Whether `wm` neighbour weights enter conjugated.
    pub conjugate_neighbors: bool,
    pub activation: Activation,
}

impl BackboneSpec {
    pub fn new(kind: BackboneKind, windows: usize, embed: usize) -> Self {
        Self {
            kind,
            windows,
            embed,
            radius: 1,
            conjugate_neighbors: true,
            activation: Activation::Relu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows == 0 || self.embed == 0 {
            return Err(config_err!("backbone needs at least one window and a positive embedding size"));
        }
        match self.kind {
            BackboneKind::Hc if !matches!(self.windows, 2 | 4 | 8) => Err(config_err!(
                "hc backbone needs p in {{2, 4, 8}} windows, got {}; use the wm or basic backbone instead",
                self.windows
            )),
            BackboneKind::Wm if self.windows > 1 && self.radius >= self.windows => Err(config_err!(
                "wm neighbour radius {} must be below the window count {}",
                self.radius,
                self.windows
            )),
            _ => Ok(()),
        }
    }

    pub fn weight_matrices(&self) -> usize {
        count_weight_matrices(self.kind, self.windows, self.radius)
    }

    fn bias_count(&self) -> usize {
        match self.kind {
            BackboneKind::Fd => 1,
            _ => self.windows,
        }
    }

    /// Weight-index → window pair, for `wm` and `basic`.
    pub fn links(&self) -> Vec<Link> {
        match self.kind {
            BackboneKind::Wm => wm_links(self.windows, self.radius),
            BackboneKind::Basic => all_links(self.windows),
            BackboneKind::Fd | BackboneKind::Hc => Vec::new(),
        }
    }

    /// Human-readable role of weight `k`.
    pub fn weight_role(&self, k: usize) -> String {
        match self.kind {
            BackboneKind::Fd => String::from("w"),
            BackboneKind::Hc => format!("w{}", k + 1),
            BackboneKind::Wm | BackboneKind::Basic => {
                let l = self.links()[k];
                format!("w{}->{}", l.src + 1, l.dst + 1)
            }
        }
    }
}

/// A pair of real planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Planes<T> {
    pub re: T,
    pub im: T,
}

impl<T> Planes<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Planes<U> {
        Planes {
            re: f(&self.re),
            im: f(&self.im),
        }
    }
}

impl From<ComplexTensor> for Planes<Tensor> {
    fn from(c: ComplexTensor) -> Self {
        Planes { re: c.re, im: c.im }
    }
}

impl From<Planes<Tensor>> for ComplexTensor {
    fn from(p: Planes<Tensor>) -> Self {
        ComplexTensor { re: p.re, im: p.im }
    }
}

/// Complex weights (`[E, E]` planes) and biases (`[E]` planes).
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams<T> {
    pub weights: Vec<Planes<T>>,
    pub biases: Vec<Planes<T>>,
}

impl<T> BackboneParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> BackboneParams<U> {
        BackboneParams {
            weights: self.weights.iter().map(|w| w.map(&mut f)).collect(),
            biases: self.biases.iter().map(|b| b.map(&mut f)).collect(),
        }
    }

    /// Every tensor in canonical order: weights then biases, real before
    /// imaginary.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.weights
            .iter()
            .chain(&self.biases)
            .flat_map(|p| [&p.re, &p.im])
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights
            .iter_mut()
            .chain(&mut self.biases)
            .flat_map(|p| [&mut p.re, &mut p.im])
    }
}

impl BackboneParams<Tensor> {
    pub fn zeros(spec: &BackboneSpec) -> Self {
        let e = spec.embed;
        let plane = |shape: &[usize]| Planes {
            re: Tensor::zeros(shape),
            im: Tensor::zeros(shape),
        };
        Self {
            weights: (0..spec.weight_matrices()).map(|_| plane(&[e, e])).collect(),
            biases: (0..spec.bias_count()).map(|_| plane(&[e])).collect(),
        }
    }

    /// Weights uniform in `±1/√E`, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &BackboneSpec, rng: &mut R) -> Self {
        let bound = 1.0 / libm::sqrt(spec.embed as f64);
        let mut out = Self::zeros(spec);
        for w in &mut out.weights {
            for t in [&mut w.re, &mut w.im] {
                t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-bound..=bound));
            }
        }
        out
    }

    /// Parameters for which the backbone maps its input to itself (with
    /// the identity activation): the multiplicative unit in every slot
    /// that touches a window's own spectrum.
    pub fn identity(spec: &BackboneSpec) -> Self {
        let mut out = Self::zeros(spec);
        let eye = |t: &mut Tensor| {
            for i in 0..spec.embed {
                t.set(&[i, i], 1.0);
            }
        };
        match spec.kind {
            BackboneKind::Fd | BackboneKind::Hc => eye(&mut out.weights[0].re),
            BackboneKind::Wm | BackboneKind::Basic => {
                for (k, l) in spec.links().into_iter().enumerate() {
                    if l.src == l.dst {
                        eye(&mut out.weights[k].re);
                    }
                }
            }
        }
        out
    }

    pub fn check_shapes(&self, spec: &BackboneSpec) -> Result<()> {
        let want = Self::zeros(spec);
        if self.weights.len() != want.weights.len() || self.biases.len() != want.biases.len() {
            return Err(contract!(
                "{} backbone expects {} weights and {} biases, got {} and {}",
                spec.kind,
                want.weights.len(),
                want.biases.len(),
                self.weights.len(),
                self.biases.len()
            ));
        }
        for (a, b) in self.iter().zip(want.iter()) {
            if a.shape() != b.shape() {
                return Err(contract!("backbone tensor shape {:?}, expected {:?}", a.shape(), b.shape()));
            }
        }
        Ok(())
    }
}

/// Signed partial sums of one output plane.
#[derive(Default)]
struct SignedSum(Vec<(bool, Var)>);

impl SignedSum {
    fn push(&mut self, negative: bool, v: Var) {
        self.0.push((negative, v));
    }

    fn finish(self, tape: &mut GradTape) -> Result<Option<Var>> {
        let mut terms = self.0.into_iter();
        let Some((neg, first)) = terms.next() else {
            return Ok(None);
        };
        let mut acc = if neg { tape.neg(first) } else { first };
        for (neg, v) in terms {
            acc = if neg { tape.sub(acc, v)? } else { tape.add(acc, v)? };
        }
        Ok(Some(acc))
    }
}

#[derive(Default)]
struct ComplexSum {
    re: SignedSum,
    im: SignedSum,
}

impl ComplexSum {
    /// Adds `sign · op(x) · op(w)` where `op` optionally conjugates.
    fn push_product(
        &mut self,
        tape: &mut GradTape,
        x: &Planes<Var>,
        x_conj: bool,
        w: &Planes<Var>,
        w_conj: bool,
        negative: bool,
    ) -> Result<()> {
        let rr = tape.matmul(x.re, w.re)?;
        let ii = tape.matmul(x.im, w.im)?;
        let ri = tape.matmul(x.re, w.im)?;
        let ir = tape.matmul(x.im, w.re)?;
        // re = xr wr - sx sw xi wi ; im = sw xr wi + sx xi wr
        self.re.push(negative, rr);
        self.re.push(negative ^ (x_conj == w_conj), ii);
        self.im.push(negative ^ w_conj, ri);
        self.im.push(negative ^ x_conj, ir);
        Ok(())
    }

    fn finish(
        self,
        tape: &mut GradTape,
        bias: &Planes<Var>,
        act: Activation,
        like: Var,
    ) -> Result<Planes<Var>> {
        let mut plane = |s: SignedSum, b: Var| -> Result<Var> {
            let v = match s.finish(tape)? {
                Some(v) => v,
                None => {
                    let z = Tensor::zeros(tape.shape(like));
                    tape.leaf(z)
                }
            };
            let v = tape.add_bias(v, b)?;
            Ok(match act {
                Activation::Relu => tape.relu(v),
                Activation::Identity => v,
            })
        };
        let re = plane(self.re, bias.re)?;
        let im = plane(self.im, bias.im)?;
        Ok(Planes { re, im })
    }
}

/// Records the backbone on `tape`. `x` holds one `[B, M, D, E]` plane pair
/// per window.
pub fn forward_tape(
    spec: &BackboneSpec,
    tape: &mut GradTape,
    params: &BackboneParams<Var>,
    x: &[Planes<Var>],
) -> Result<Vec<Planes<Var>>> {
    spec.validate()?;
    let p = spec.windows;
    if x.len() != p {
        return Err(contract!("backbone built for {p} windows received {}", x.len()));
    }
    if params.weights.len() != spec.weight_matrices() || params.biases.len() != spec.bias_count() {
        return Err(contract!("parameter set does not match the {} backbone layout", spec.kind));
    }
    for w in x {
        if tape.shape(w.re).last() != Some(&spec.embed) || tape.shape(w.re) != tape.shape(w.im) {
            return Err(contract!(
                "backbone input {:?} does not end in the embedding size {}",
                tape.shape(w.re),
                spec.embed
            ));
        }
    }
    let mut sums: Vec<ComplexSum> = (0..p).map(|_| ComplexSum::default()).collect();
    match spec.kind {
        BackboneKind::Fd => {
            for (i, s) in sums.iter_mut().enumerate() {
                s.push_product(tape, &x[i], false, &params.weights[0], false, false)?;
            }
        }
        BackboneKind::Wm | BackboneKind::Basic => {
            let conj = spec.kind == BackboneKind::Wm && spec.conjugate_neighbors;
            for (k, l) in spec.links().into_iter().enumerate() {
                let wc = conj && l.src != l.dst;
                sums[l.dst].push_product(tape, &x[l.src], false, &params.weights[k], wc, false)?;
            }
        }
        BackboneKind::Hc => {
            let table = ProductTable::from_recursion(Base::from_components(p)?);
            for (row, s) in table.rows().iter().zip(sums.iter_mut()) {
                for t in row {
                    s.push_product(tape, &x[t.a], t.a_conj, &params.weights[t.b], t.b_conj, t.sign < 0)?;
                }
            }
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, s)| {
            let b = &params.biases[if spec.kind == BackboneKind::Fd { 0 } else { i }];
            s.finish(tape, b, spec.activation, x[i].re)
        })
        .collect()
}

/// A backbone with concrete parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub spec: BackboneSpec,
    pub params: BackboneParams<Tensor>,
}

impl Backbone {
    pub fn new(spec: BackboneSpec, params: BackboneParams<Tensor>) -> Result<Self> {
        spec.validate()?;
        params.check_shapes(&spec)?;
        Ok(Self { spec, params })
    }

    /// Runs on raw `[B, M, D, E]` windows.
    pub fn apply(&self, windows: &[ComplexTensor]) -> Result<Vec<ComplexTensor>> {
        let mut tape = GradTape::new();
        let params = self.params.map(|t| tape.leaf(t.clone()));
        let x: Vec<Planes<Var>> = windows
            .iter()
            .map(|w| Planes {
                re: tape.leaf(w.re.clone()),
                im: tape.leaf(w.im.clone()),
            })
            .collect();
        let out = forward_tape(&self.spec, &mut tape, &params, &x)?;
        Ok(out
            .into_iter()
            .map(|p| ComplexTensor {
                re: tape.value(p.re).clone(),
                im: tape.value(p.im).clone(),
            })
            .collect())
    }

    pub fn forward(&self, c: &CompressedWindows) -> Result<CompressedWindows> {
        Ok(CompressedWindows {
            plan: c.plan.clone(),
            windows: self.apply(&c.windows)?,
            indices: c.indices.clone(),
        })
    }
}

/// One complex affine layer, `[E, E]` weight and `[E]` bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexLinear {
    pub weight: ComplexTensor,
    pub bias: ComplexTensor,
}

/// `act(c·W + B)` over the last axis of `c`.
pub fn fd_mlp_forward(c: &ComplexTensor, layer: &ComplexLinear, act: Activation) -> Result<ComplexTensor> {
    let e = *layer.weight.shape().first().unwrap_or(&0);
    let mut spec = BackboneSpec::new(BackboneKind::Fd, 1, e);
    spec.activation = act;
    let bb = Backbone::new(
        spec,
        BackboneParams {
            weights: vec![layer.weight.clone().into()],
            biases: vec![layer.bias.clone().into()],
        },
    )?;
    Ok(bb.apply(core::slice::from_ref(c))?.remove(0))
}
