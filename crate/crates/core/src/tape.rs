//! Reverse-mode differentiation over real tensors.
//!
//! A [`GradTape`] records every primitive as it is evaluated, together with
//! whatever the reverse sweep needs. Complex and hyper-complex layers never
//! appear here directly: they are composed from real matrix products, sums
//! and negations on separate real/imaginary planes, so their gradients come
//! out of the real primitives below.
//!
//! ```
//! use hcfreq_core::{tape::GradTape, Tensor};
//!
//! let mut tape = GradTape::new();
//! let x = tape.leaf(Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
//! let zero = tape.leaf(Tensor::zeros(&[2]));
//! let loss = tape.mse(x, zero).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).data(), &[1.0, 2.0]); // 2x/n
//! ```

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};
use crate::select::{gather, scatter, BinIndex};
use crate::spectral::StftPlan;
use crate::tensor::{invert_perm, permute_into, Tensor};

/// Handle to a value recorded on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Neg(Var),
    /// `[.., K] · [K, N]`
    MatMul(Var, Var),
    /// `[.., N] + [N]`
    AddBias(Var, Var),
    /// `[..] ⊗ [E] → [.., E]`
    Outer(Var, Var),
    Relu(Var),
    Permute(Var, Vec<usize>),
    Reshape(Var),
    /// Slice `i` of axis 0.
    Take(Var, usize),
    Stack(Vec<Var>),
    Gather(Var, Arc<BinIndex>),
    Scatter(Var, Arc<BinIndex>),
    Stft(Var, StftPlan),
    Istft(Var, StftPlan),
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of one scalar with respect to every recorded value.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; all zeros when `v` does not reach the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => Tensor::from_vec(&self.shapes[v.0], g.clone()).expect("recorded shape"),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    /// Whether any gradient flowed into `v`.
    pub fn reached(&self, v: Var) -> bool {
        self.grads[v.0].is_some()
    }
}

fn last_dim(shape: &[usize]) -> usize {
    shape.last().copied().unwrap_or(1)
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(contract!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(a),
                self.shape(b)
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let v = Tensor::from_fn(self.shape(a), |i| self.value(a).data()[i] + self.value(b).data()[i]);
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let v = Tensor::from_fn(self.shape(a), |i| self.value(a).data()[i] - self.value(b).data()[i]);
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| -x);
        self.push(v, Op::Neg(a))
    }

    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if ws.len() != 2 || xs.is_empty() || last_dim(xs) != ws[0] {
            return Err(contract!("matmul: cannot multiply {:?} by {:?}", xs, ws));
        }
        let (k, n) = (ws[0], ws[1]);
        let rows = self.value(x).numel() / k;
        let mut shape = xs.to_vec();
        *shape.last_mut().expect("non-empty") = n;
        let (xd, wd) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![0.0; rows * n];
        for r in 0..rows {
            let orow = &mut out[r * n..(r + 1) * n];
            for (kk, &xv) in xd[r * k..(r + 1) * k].iter().enumerate() {
                for (o, &wv) in orow.iter_mut().zip(&wd[kk * n..(kk + 1) * n]) {
                    *o += xv * wv;
                }
            }
        }
        let v = Tensor::from_vec(&shape, out)?;
        Ok(self.push(v, Op::MatMul(x, w)))
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let n = last_dim(self.shape(x));
        if self.shape(b) != [n] {
            return Err(contract!(
                "add_bias: bias {:?} does not match last axis of {:?}",
                self.shape(b),
                self.shape(x)
            ));
        }
        let bd = self.value(b).data();
        let v = Tensor::from_fn(self.shape(x), |i| self.value(x).data()[i] + bd[i % n]);
        Ok(self.push(v, Op::AddBias(x, b)))
    }

    pub fn outer(&mut self, x: Var, e: Var) -> Result<Var> {
        if self.shape(e).len() != 1 {
            return Err(contract!("outer: expected a vector, got {:?}", self.shape(e)));
        }
        let n = self.shape(e)[0];
        let mut shape = self.shape(x).to_vec();
        shape.push(n);
        let (xd, ed) = (self.value(x).data(), self.value(e).data());
        let v = Tensor::from_fn(&shape, |i| xd[i / n] * ed[i % n]);
        Ok(self.push(v, Op::Outer(x, e)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| if a > 0.0 { a } else { 0.0 });
        self.push(v, Op::Relu(x))
    }

    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let rank = self.shape(x).len();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || core::mem::replace(&mut seen[p], true)) {
            return Err(contract!("permute: {:?} is not a permutation of rank {rank}", perm));
        }
        let v = self.value(x).permute(perm);
        Ok(self.push(v, Op::Permute(x, perm.to_vec())))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshape(shape)?;
        Ok(self.push(v, Op::Reshape(x)))
    }

    pub fn take(&mut self, x: Var, i: usize) -> Result<Var> {
        let shape = self.shape(x);
        if shape.is_empty() || i >= shape[0] {
            return Err(contract!("take: index {i} out of range for {:?}", shape));
        }
        let rest = shape[1..].to_vec();
        let len: usize = rest.iter().product();
        let v = Tensor::from_vec(&rest, self.value(x).data()[i * len..(i + 1) * len].to_vec())?;
        Ok(self.push(v, Op::Take(x, i)))
    }

    pub fn stack(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| contract!("stack: no inputs"))?;
        let inner = self.shape(*first).to_vec();
        let mut data = Vec::with_capacity(xs.len() * self.value(*first).numel());
        for &x in xs {
            if self.shape(x) != inner.as_slice() {
                return Err(contract!("stack: shapes {:?} and {:?} differ", inner, self.shape(x)));
            }
            data.extend_from_slice(self.value(x).data());
        }
        let mut shape = vec![xs.len()];
        shape.extend_from_slice(&inner);
        let v = Tensor::from_vec(&shape, data)?;
        Ok(self.push(v, Op::Stack(xs.to_vec())))
    }

    /// `[B, bins, D, E] → [B, M, D, E]` keeping the bins listed in `idx`.
    pub fn gather_bins(&mut self, x: Var, idx: Arc<BinIndex>) -> Result<Var> {
        let [b, bins, d, e] = rank4(self.shape(x), "gather_bins")?;
        if (idx.batch, idx.channels) != (b, d) || idx.data.iter().any(|&j| j >= bins) {
            return Err(contract!("gather_bins: index set does not fit {:?}", self.shape(x)));
        }
        let out = gather(self.value(x).data(), bins, e, &idx);
        let v = Tensor::from_vec(&[b, idx.kept, d, e], out)?;
        Ok(self.push(v, Op::Gather(x, idx)))
    }

    /// `[B, M, D, E] → [B, bins, D, E]` with zeros at unlisted bins.
    pub fn scatter_bins(&mut self, x: Var, idx: Arc<BinIndex>, bins: usize) -> Result<Var> {
        let [b, m, d, e] = rank4(self.shape(x), "scatter_bins")?;
        if (idx.batch, idx.kept, idx.channels) != (b, m, d) || idx.data.iter().any(|&j| j >= bins) {
            return Err(contract!("scatter_bins: index set does not fit {:?}", self.shape(x)));
        }
        let mut out = vec![0.0; b * bins * d * e];
        scatter(self.value(x).data(), bins, e, &idx, &mut out);
        let v = Tensor::from_vec(&[b, bins, d, e], out)?;
        Ok(self.push(v, Op::Scatter(x, idx)))
    }

    /// `[B, L, D, E] → [2p, B, bins, D, E]`, real plane before imaginary
    /// plane for each window.
    pub fn stft(&mut self, x: Var, plan: &StftPlan) -> Result<Var> {
        let [b, l, d, e] = rank4(self.shape(x), "stft")?;
        if l != plan.lookback() {
            return Err(contract!("stft: time axis {l} != lookback {}", plan.lookback()));
        }
        let out = plan.analyze(self.value(x).data(), b, d * e);
        let v = Tensor::from_vec(&[2 * plan.windows(), b, plan.bins(), d, e], out)?;
        Ok(self.push(v, Op::Stft(x, plan.clone())))
    }

    /// Inverse of [`Self::stft`].
    pub fn istft(&mut self, x: Var, plan: &StftPlan) -> Result<Var> {
        let (b, d, e) = match *self.shape(x) {
            [w, b, k, d, e] if w == 2 * plan.windows() && k == plan.bins() => (b, d, e),
            _ => return Err(contract!("istft: unexpected input {:?}", self.shape(x))),
        };
        let out = plan.synthesize(self.value(x).data(), b, d * e);
        let v = Tensor::from_vec(&[b, plan.lookback(), d, e], out)?;
        Ok(self.push(v, Op::Istft(x, plan.clone())))
    }

    /// Mean squared difference, as a one-element tensor.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "mse")?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let sum: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = Tensor::scalar(sum / p.len() as f64);
        Ok(self.push(v, Op::Mse(pred, target)))
    }

    /// Reverse sweep from the scalar `loss`. A tape can be swept once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(contract!("gradient tape already consumed by a backward pass"));
        }
        if self.value(loss).numel() != 1 {
            return Err(contract!("backward needs a scalar, got {:?}", self.shape(loss)));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.step_back(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn step_back(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |v: Var| self.nodes[v.0].value.data();
        let numel = |v: Var| self.nodes[v.0].value.numel();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                accumulate(grads, *a, numel(*a), |d| add_into(d, g));
                accumulate(grads, *b, numel(*b), |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, numel(*a), |d| add_into(d, g));
                accumulate(grads, *b, numel(*b), |d| {
                    d.iter_mut().zip(g).for_each(|(x, y)| *x -= y)
                });
            }
            Op::Neg(a) => accumulate(grads, *a, numel(*a), |d| {
                d.iter_mut().zip(g).for_each(|(x, y)| *x -= y)
            }),
            Op::MatMul(x, w) => {
                let ws = self.shape(*w);
                let (k, n) = (ws[0], ws[1]);
                let rows = numel(*x) / k;
                let (xd, wd) = (val(*x), val(*w));
                accumulate(grads, *x, numel(*x), |dx| {
                    for r in 0..rows {
                        let grow = &g[r * n..(r + 1) * n];
                        for kk in 0..k {
                            let wrow = &wd[kk * n..(kk + 1) * n];
                            dx[r * k + kk] += grow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                });
                accumulate(grads, *w, numel(*w), |dw| {
                    for r in 0..rows {
                        let grow = &g[r * n..(r + 1) * n];
                        for kk in 0..k {
                            let xv = xd[r * k + kk];
                            for (o, &gv) in dw[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                                *o += xv * gv;
                            }
                        }
                    }
                });
            }
            Op::AddBias(x, b) => {
                accumulate(grads, *x, numel(*x), |d| add_into(d, g));
                let n = numel(*b);
                accumulate(grads, *b, n, |d| {
                    for (j, gv) in g.iter().enumerate() {
                        d[j % n] += gv;
                    }
                });
            }
            Op::Outer(x, e) => {
                let n = numel(*e);
                let (xd, ed) = (val(*x), val(*e));
                accumulate(grads, *x, numel(*x), |d| {
                    for (r, dv) in d.iter_mut().enumerate() {
                        *dv += g[r * n..(r + 1) * n].iter().zip(ed).map(|(a, b)| a * b).sum::<f64>();
                    }
                });
                accumulate(grads, *e, n, |d| {
                    for (r, &xv) in xd.iter().enumerate() {
                        for (o, &gv) in d.iter_mut().zip(&g[r * n..(r + 1) * n]) {
                            *o += xv * gv;
                        }
                    }
                });
            }
            Op::Relu(x) => {
                let out = node.value.data();
                accumulate(grads, *x, numel(*x), |d| {
                    for ((dv, &gv), &o) in d.iter_mut().zip(g).zip(out) {
                        if o > 0.0 {
                            *dv += gv;
                        }
                    }
                });
            }
            Op::Permute(x, perm) => {
                let inv = invert_perm(perm);
                let shape = node.value.shape();
                accumulate(grads, *x, numel(*x), |d| permute_into(g, shape, &inv, d, true));
            }
            Op::Reshape(x) => accumulate(grads, *x, numel(*x), |d| add_into(d, g)),
            Op::Take(x, idx) => {
                let len = g.len();
                accumulate(grads, *x, numel(*x), |d| add_into(&mut d[idx * len..(idx + 1) * len], g));
            }
            Op::Stack(xs) => {
                let len = g.len() / xs.len();
                for (k, x) in xs.iter().enumerate() {
                    accumulate(grads, *x, len, |d| add_into(d, &g[k * len..(k + 1) * len]));
                }
            }
            Op::Gather(x, idx) => {
                let [_, bins, _, e] = rank4(self.shape(*x), "gather").expect("recorded");
                accumulate(grads, *x, numel(*x), |d| scatter(g, bins, e, idx, d));
            }
            Op::Scatter(x, idx) => {
                let [_, bins, _, e] = rank4(node.value.shape(), "scatter").expect("recorded");
                let back = gather(g, bins, e, idx);
                accumulate(grads, *x, numel(*x), |d| add_into(d, &back));
            }
            Op::Stft(x, plan) => {
                let [b, _, dd, e] = rank4(self.shape(*x), "stft").expect("recorded");
                let back = plan.analyze_adjoint(g, b, dd * e);
                accumulate(grads, *x, numel(*x), |d| add_into(d, &back));
            }
            Op::Istft(x, plan) => {
                let [b, _, dd, e] = rank4(node.value.shape(), "istft").expect("recorded");
                let back = plan.synthesize_adjoint(g, b, dd * e);
                accumulate(grads, *x, numel(*x), |d| add_into(d, &back));
            }
            Op::Mse(p, t) => {
                let (pd, td) = (val(*p), val(*t));
                let k = 2.0 * g[0] / pd.len() as f64;
                accumulate(grads, *p, pd.len(), |d| {
                    for ((dv, a), b) in d.iter_mut().zip(pd).zip(td) {
                        *dv += k * (a - b);
                    }
                });
                accumulate(grads, *t, td.len(), |d| {
                    for ((dv, a), b) in d.iter_mut().zip(pd).zip(td) {
                        *dv -= k * (a - b);
                    }
                });
            }
        }
    }
}

fn rank4(shape: &[usize], what: &str) -> Result<[usize; 4]> {
    match *shape {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => Err(contract!("{what}: expected rank 4, got {:?}", shape)),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}
