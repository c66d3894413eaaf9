//! Short-time Fourier analysis of the lookback into `p` windows and the
//! matching overlap-add synthesis.
//!
//! Windows start every `hop = (L − N_FFT)/(p − 1)` samples so that
//! `(p − 1)·hop + N_FFT = L`; a single window is the plain FFT of the
//! whole lookback. Synthesis multiplies each inverse-transformed segment
//! by the analysis window again, overlap-adds, and divides by the per-sample
//! sum of squared window values. That normalisation makes synthesis an
//! exact left inverse of analysis for every valid plan.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, contract, Result};
use crate::fft::RealDft;
use crate::tensor::{ComplexTensor, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    #[default]
    Rectangular,
    /// `sin²(π(n + ½)/N)`: a Hann window shifted by half a sample so no tap
    /// is zero.
    Hann,
}

impl WindowFn {
    pub fn taps(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; n],
            WindowFn::Hann => (0..n)
                .map(|k| {
                    let s = libm::sin(PI * (k as f64 + 0.5) / n as f64);
                    s * s
                })
                .collect(),
        }
    }
}

impl fmt::Display for WindowFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowFn::Rectangular => "rectangular",
            WindowFn::Hann => "hann",
        })
    }
}

/// A validated analysis/synthesis plan. Cheap to clone.
#[derive(Debug, Clone)]
pub struct StftPlan {
    inner: Arc<PlanInner>,
}

#[derive(Debug)]
struct PlanInner {
    lookback: usize,
    windows: usize,
    nfft: usize,
    hop: Option<usize>,
    window_fn: WindowFn,
    taps: Vec<f64>,
    /// 1 / Σᵢ w²(t − sᵢ) per lookback sample.
    inv_energy: Vec<f64>,
    dft: RealDft,
}

impl PartialEq for StftPlan {
    fn eq(&self, other: &Self) -> bool {
        self.lookback() == other.lookback()
            && self.windows() == other.windows()
            && self.nfft() == other.nfft()
            && self.window_fn() == other.window_fn()
    }
}

/// Validates `(L, p, N_FFT)` and precomputes window taps and the synthesis
/// normalisation.
pub fn plan_stft(lookback: usize, windows: usize, nfft: usize, window_fn: WindowFn) -> Result<StftPlan> {
    check_geometry(lookback, windows, nfft)?;
    let hop = if windows > 1 {
        Some((lookback - nfft) / (windows - 1))
    } else {
        None
    };
    let taps = window_fn.taps(nfft);
    let mut energy = vec![0.0; lookback];
    for i in 0..windows {
        let start = i * hop.unwrap_or(0);
        for (n, w) in taps.iter().enumerate() {
            energy[start + n] += w * w;
        }
    }
    if let Some(t) = energy.iter().position(|&e| e <= 0.0) {
        return Err(config_err!(
            "sample {t} of the lookback is covered by no window (L={lookback}, p={windows}, N_FFT={nfft})"
        ));
    }
    Ok(StftPlan {
        inner: Arc::new(PlanInner {
            lookback,
            windows,
            nfft,
            hop,
            window_fn,
            taps,
            inv_energy: energy.iter().map(|e| 1.0 / e).collect(),
            dft: RealDft::new(nfft),
        }),
    })
}

fn check_geometry(lookback: usize, windows: usize, nfft: usize) -> Result<()> {
    if windows == 0 || nfft == 0 {
        return Err(config_err!("window count and N_FFT must be positive"));
    }
    if nfft > lookback {
        return Err(config_err!("N_FFT={nfft} exceeds the lookback L={lookback}"));
    }
    if windows == 1 {
        if nfft != lookback {
            return Err(config_err!(
                "a single window must span the lookback (N_FFT={nfft}, L={lookback})"
            ));
        }
        return Ok(());
    }
    let span = lookback - nfft;
    if span % (windows - 1) != 0 || span == 0 {
        let hint = match nearest_valid_windows(lookback, nfft, windows) {
            Some(p) => format!("; nearest valid window count is p={p}"),
            None => String::new(),
        };
        return Err(config_err!(
            "L={lookback}, p={windows}, N_FFT={nfft}: (L - N_FFT) = {span} is not a positive multiple of (p - 1) = {}{hint}",
            windows - 1
        ));
    }
    if span / (windows - 1) > nfft {
        return Err(config_err!(
            "hop {} exceeds N_FFT={nfft}; windows leave gaps in the lookback",
            span / (windows - 1)
        ));
    }
    Ok(())
}

/// Window count closest to `wanted` that tiles `lookback` with `nfft`-long
/// windows and no gaps. Ties go to the smaller count.
pub fn nearest_valid_windows(lookback: usize, nfft: usize, wanted: usize) -> Option<usize> {
    if nfft > lookback || nfft == 0 {
        return None;
    }
    if nfft == lookback {
        return Some(1);
    }
    let span = lookback - nfft;
    (2..=span + 1)
        .filter(|p| span % (p - 1) == 0 && span / (p - 1) <= nfft)
        .min_by_key(|&p| (p.abs_diff(wanted), p))
}

/// Largest-overlap-preserving plan for lookback `lookback` and `windows`
/// windows whose N_FFT is the valid size closest to `ratio · lookback`.
pub fn scaled_nfft(lookback: usize, windows: usize, ratio: f64) -> Option<usize> {
    let target = ratio * lookback as f64;
    (1..=lookback)
        .filter(|&n| check_geometry(lookback, windows, n).is_ok())
        .min_by(|&a, &b| {
            let (da, db) = ((a as f64 - target).abs(), (b as f64 - target).abs());
            da.partial_cmp(&db).expect("finite").then(a.cmp(&b))
        })
}

impl StftPlan {
    pub fn lookback(&self) -> usize {
        self.inner.lookback
    }

    pub fn windows(&self) -> usize {
        self.inner.windows
    }

    pub fn nfft(&self) -> usize {
        self.inner.nfft
    }

    /// `None` for a single window.
    pub fn hop(&self) -> Option<usize> {
        self.inner.hop
    }

    pub fn overlap(&self) -> usize {
        self.inner.hop.map_or(0, |h| self.nfft().saturating_sub(h))
    }

    pub fn window_fn(&self) -> WindowFn {
        self.inner.window_fn
    }

    pub fn taps(&self) -> &[f64] {
        &self.inner.taps
    }

    pub fn bins(&self) -> usize {
        self.inner.dft.bins()
    }

    pub fn start(&self, i: usize) -> usize {
        i * self.inner.hop.unwrap_or(0)
    }

    /// Window centres τᵢ = i·hop + N_FFT/2.
    pub fn centers(&self) -> Vec<usize> {
        (0..self.windows()).map(|i| self.start(i) + self.nfft() / 2).collect()
    }

    /// Analysis on a flat `[B, L, inner]` buffer into `[p, 2, B, bins, inner]`
    /// (real plane then imaginary plane per window).
    pub(crate) fn analyze(&self, x: &[f64], batch: usize, inner: usize) -> Vec<f64> {
        let (l, n, bins, p) = (self.lookback(), self.nfft(), self.bins(), self.windows());
        let plane = batch * bins * inner;
        let mut out = vec![0.0; p * 2 * plane];
        let mut seg = vec![0.0; n];
        let (mut re, mut im) = (vec![0.0; bins], vec![0.0; bins]);
        for i in 0..p {
            let s = self.start(i);
            for b in 0..batch {
                for c in 0..inner {
                    for t in 0..n {
                        seg[t] = x[(b * l + s + t) * inner + c] * self.inner.taps[t];
                    }
                    self.inner.dft.forward(&seg, &mut re, &mut im);
                    for k in 0..bins {
                        let o = (b * bins + k) * inner + c;
                        out[2 * i * plane + o] = re[k];
                        out[(2 * i + 1) * plane + o] = im[k];
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`Self::analyze`].
    pub(crate) fn analyze_adjoint(&self, g: &[f64], batch: usize, inner: usize) -> Vec<f64> {
        let (l, n, bins, p) = (self.lookback(), self.nfft(), self.bins(), self.windows());
        let plane = batch * bins * inner;
        let mut out = vec![0.0; batch * l * inner];
        let (mut gr, mut gi) = (vec![0.0; bins], vec![0.0; bins]);
        let mut seg = vec![0.0; n];
        for i in 0..p {
            let s = self.start(i);
            for b in 0..batch {
                for c in 0..inner {
                    for k in 0..bins {
                        let o = (b * bins + k) * inner + c;
                        gr[k] = g[2 * i * plane + o];
                        gi[k] = g[(2 * i + 1) * plane + o];
                    }
                    self.inner.dft.forward_adjoint(&gr, &gi, &mut seg);
                    for t in 0..n {
                        out[(b * l + s + t) * inner + c] += seg[t] * self.inner.taps[t];
                    }
                }
            }
        }
        out
    }

    /// Synthesis from `[p, 2, B, bins, inner]` back to `[B, L, inner]`.
    pub(crate) fn synthesize(&self, spec: &[f64], batch: usize, inner: usize) -> Vec<f64> {
        let (l, n, bins, p) = (self.lookback(), self.nfft(), self.bins(), self.windows());
        let plane = batch * bins * inner;
        let mut out = vec![0.0; batch * l * inner];
        let (mut re, mut im) = (vec![0.0; bins], vec![0.0; bins]);
        let mut seg = vec![0.0; n];
        for i in 0..p {
            let s = self.start(i);
            for b in 0..batch {
                for c in 0..inner {
                    for k in 0..bins {
                        let o = (b * bins + k) * inner + c;
                        re[k] = spec[2 * i * plane + o];
                        im[k] = spec[(2 * i + 1) * plane + o];
                    }
                    self.inner.dft.inverse(&re, &im, &mut seg);
                    for t in 0..n {
                        let at = s + t;
                        out[(b * l + at) * inner + c] +=
                            seg[t] * self.inner.taps[t] * self.inner.inv_energy[at];
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`Self::synthesize`].
    pub(crate) fn synthesize_adjoint(&self, g: &[f64], batch: usize, inner: usize) -> Vec<f64> {
        let (l, n, bins, p) = (self.lookback(), self.nfft(), self.bins(), self.windows());
        let plane = batch * bins * inner;
        let mut out = vec![0.0; p * 2 * plane];
        let (mut re, mut im) = (vec![0.0; bins], vec![0.0; bins]);
        let mut seg = vec![0.0; n];
        for i in 0..p {
            let s = self.start(i);
            for b in 0..batch {
                for c in 0..inner {
                    for t in 0..n {
                        let at = s + t;
                        seg[t] = g[(b * l + at) * inner + c]
                            * self.inner.taps[t]
                            * self.inner.inv_energy[at];
                    }
                    self.inner.dft.inverse_adjoint(&seg, &mut re, &mut im);
                    for k in 0..bins {
                        let o = (b * bins + k) * inner + c;
                        out[2 * i * plane + o] = re[k];
                        out[(2 * i + 1) * plane + o] = im[k];
                    }
                }
            }
        }
        out
    }
}

/// The `p` one-sided window spectra of a `[B, L, D, E]` input, each shaped
/// `[B, bins, D, E]`.
#[derive(Debug, Clone)]
pub struct SpectralWindows {
    pub plan: StftPlan,
    pub windows: Vec<ComplexTensor>,
}

impl SpectralWindows {
    /// Total squared magnitude over all windows.
    pub fn energy(&self) -> f64 {
        self.windows.iter().map(ComplexTensor::energy).sum()
    }

    pub fn max_abs_diff(&self, other: &SpectralWindows) -> f64 {
        self.windows
            .iter()
            .zip(&other.windows)
            .fold(0.0, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }

    /// Flattens into the `[p, 2, B, bins, inner]` layout.
    pub(crate) fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in &self.windows {
            out.extend_from_slice(w.re.data());
            out.extend_from_slice(w.im.data());
        }
        out
    }
}

fn split_shape(x: &Tensor, lookback: usize) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, l, d, e] if l == lookback => Ok((b, d, e)),
        _ => Err(contract!(
            "expected a [B, L={lookback}, D, E] tensor, got {:?}",
            x.shape()
        )),
    }
}

/// Real-input STFT of a `[B, L, D, E]` tensor.
pub fn rstft(x: &Tensor, plan: &StftPlan) -> Result<SpectralWindows> {
    let (b, d, e) = split_shape(x, plan.lookback())?;
    let flat = plan.analyze(x.data(), b, d * e);
    let shape = [b, plan.bins(), d, e];
    let plane = b * plan.bins() * d * e;
    let windows = flat
        .chunks_exact(2 * plane)
        .map(|w| ComplexTensor {
            re: Tensor::from_vec(&shape, w[..plane].to_vec()).expect("sized"),
            im: Tensor::from_vec(&shape, w[plane..].to_vec()).expect("sized"),
        })
        .collect();
    Ok(SpectralWindows {
        plan: plan.clone(),
        windows,
    })
}

/// Normalised overlap-add inverse of [`rstft`]; returns `[B, L, D, E]`.
pub fn istft(s: &SpectralWindows) -> Result<Tensor> {
    let plan = &s.plan;
    if s.windows.len() != plan.windows() {
        return Err(contract!(
            "plan has {} windows, spectra have {}",
            plan.windows(),
            s.windows.len()
        ));
    }
    let shape = s.windows[0].shape().to_vec();
    let (b, d, e) = match *shape.as_slice() {
        [b, k, d, e] if k == plan.bins() => (b, d, e),
        _ => {
            return Err(contract!(
                "window spectra must be [B, bins={}, D, E], got {:?}",
                plan.bins(),
                shape
            ))
        }
    };
    if s.windows.iter().any(|w| w.shape() != shape.as_slice()) {
        return Err(contract!("window spectra differ in shape"));
    }
    let out = plan.synthesize(&s.to_flat(), b, d * e);
    Tensor::from_vec(&[b, plan.lookback(), d, e], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Windowed naive DFT straight from the definition.
    fn oracle(x: &[f64], plan: &StftPlan, window: usize) -> (Vec<f64>, Vec<f64>) {
        let n = plan.nfft();
        let s = plan.start(window);
        let taps = plan.window_fn().taps(n);
        (0..plan.bins())
            .map(|k| {
                (0..n).fold((0.0, 0.0), |(r, i), t| {
                    let ang = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    let v = x[s + t] * taps[t];
                    (r + v * libm::cos(ang), i - v * libm::sin(ang))
                })
            })
            .unzip()
    }

    #[test]
    fn indivisible_hop_is_rejected_with_suggestion() {
        let err = plan_stft(96, 13, 16, WindowFn::Rectangular).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("L=96") && msg.contains("p=13") && msg.contains("N_FFT=16"), "{msg}");
        assert!(msg.contains("p=11"), "{msg}");
        assert_eq!(nearest_valid_windows(96, 16, 13), Some(11));
        assert!(plan_stft(96, 2, 120, WindowFn::Rectangular).is_err());
        assert!(plan_stft(96, 1, 48, WindowFn::Rectangular).is_err());
        // hop 40 > N_FFT 16 would leave gaps
        assert!(plan_stft(96, 3, 16, WindowFn::Rectangular).is_err());
    }

    #[test]
    fn plan_geometry() {
        let single = plan_stft(96, 1, 96, WindowFn::Rectangular).unwrap();
        assert_eq!(single.hop(), None);
        assert_eq!(single.bins(), 49);
        let p = plan_stft(96, 6, 16, WindowFn::Rectangular).unwrap();
        assert_eq!(p.hop(), Some(16));
        assert_eq!(p.overlap(), 0);
        assert_eq!(p.centers(), vec![8, 24, 40, 56, 72, 88]);
        let ettm1 = plan_stft(96, 4, 48, WindowFn::Rectangular).unwrap();
        assert_eq!((ettm1.hop(), ettm1.overlap()), (Some(16), 32));
    }

    #[test]
    fn zero_and_constant_inputs() {
        let plan = plan_stft(96, 6, 16, WindowFn::Rectangular).unwrap();
        let s = rstft(&Tensor::zeros(&[1, 96, 1, 1]), &plan).unwrap();
        assert_eq!(s.energy(), 0.0);
        assert_eq!(istft(&s).unwrap(), Tensor::zeros(&[1, 96, 1, 1]));

        let s = rstft(&Tensor::filled(&[1, 96, 1, 1], 1.0), &plan).unwrap();
        for w in &s.windows {
            assert!((w.re.data()[0] - 16.0).abs() < 1e-12);
            assert!(w.re.data()[1..].iter().all(|v| v.abs() < 1e-12));
            assert!(w.im.data().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn bin_aligned_tone_lands_in_its_bin() {
        let plan = plan_stft(96, 6, 16, WindowFn::Rectangular).unwrap();
        let k = 3;
        let x = Tensor::from_fn(&[1, 96, 1, 1], |t| libm::sin(2.0 * PI * (k * t) as f64 / 16.0));
        let s = rstft(&x, &plan).unwrap();
        for w in &s.windows {
            for j in 0..plan.bins() {
                let mag = libm::hypot(w.re.data()[j], w.im.data()[j]);
                if j == k {
                    assert!((mag - 8.0).abs() < 1e-10);
                } else {
                    assert!(mag < 1e-10);
                }
            }
        }
    }

    #[test]
    fn matches_naive_oracle_and_keeps_dc_real() {
        for (l, p, n, wf) in [
            (96, 6, 16, WindowFn::Rectangular),
            (96, 4, 48, WindowFn::Hann),
            (20, 3, 10, WindowFn::Rectangular),
            (9, 2, 5, WindowFn::Hann),
        ] {
            let plan = plan_stft(l, p, n, wf).unwrap();
            let x = random_input(&[2, l, 1, 1], 7);
            let s = rstft(&x, &plan).unwrap();
            for b in 0..2 {
                let row = &x.data()[b * l..(b + 1) * l];
                for (i, w) in s.windows.iter().enumerate() {
                    let (re, im) = oracle(row, &plan, i);
                    let scale = re.iter().chain(&im).fold(1.0f64, |m, v| m.max(v.abs()));
                    for k in 0..plan.bins() {
                        let got = (w.re.at(&[b, k, 0, 0]), w.im.at(&[b, k, 0, 0]));
                        assert!((got.0 - re[k]).abs() / scale < 1e-10);
                        assert!((got.1 - im[k]).abs() / scale < 1e-10);
                    }
                    assert!(w.im.at(&[b, 0, 0, 0]).abs() < 1e-12);
                    if n % 2 == 0 {
                        assert!(w.im.at(&[b, n / 2, 0, 0]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_rectangular_and_hann() {
        for wf in [WindowFn::Rectangular, WindowFn::Hann] {
            // 50% overlap: hop 8 with N_FFT 16
            for (l, p, n) in [(96, 6, 16), (96, 11, 16), (96, 1, 96), (96, 4, 48)] {
                let plan = plan_stft(l, p, n, wf).unwrap();
                let x = random_input(&[2, l, 3, 2], 11);
                let y = istft(&rstft(&x, &plan).unwrap()).unwrap();
                assert!(y.max_abs_diff(&x) / x.max_abs() < 1e-6, "{wf} {l} {p} {n}");
            }
        }
    }

    #[test]
    fn parseval_per_window() {
        let plan = plan_stft(96, 6, 16, WindowFn::Rectangular).unwrap();
        let x = random_input(&[1, 96, 1, 1], 5);
        let s = rstft(&x, &plan).unwrap();
        for (i, w) in s.windows.iter().enumerate() {
            let st = plan.start(i);
            let time: f64 = x.data()[st..st + 16].iter().map(|v| v * v).sum();
            let freq: f64 = (0..plan.bins())
                .map(|k| {
                    let m = w.re.data()[k].powi(2) + w.im.data()[k].powi(2);
                    if k == 0 || k == 8 {
                        m
                    } else {
                        2.0 * m
                    }
                })
                .sum::<f64>()
                / 16.0;
            assert!((time - freq).abs() < 1e-8);
        }
    }

    #[test]
    fn linearity() {
        let plan = plan_stft(20, 3, 10, WindowFn::Hann).unwrap();
        let x = random_input(&[1, 20, 2, 1], 1);
        let y = random_input(&[1, 20, 2, 1], 2);
        let (a, b) = (0.7, -1.3);
        let z = Tensor::from_fn(x.shape(), |i| a * x.data()[i] + b * y.data()[i]);
        let (sx, sy, sz) = (
            rstft(&x, &plan).unwrap(),
            rstft(&y, &plan).unwrap(),
            rstft(&z, &plan).unwrap(),
        );
        for i in 0..3 {
            for k in 0..sz.windows[i].re.numel() {
                let want = a * sx.windows[i].re.data()[k] + b * sy.windows[i].re.data()[k];
                assert!((sz.windows[i].re.data()[k] - want).abs() < 1e-10);
                let want = a * sx.windows[i].im.data()[k] + b * sy.windows[i].im.data()[k];
                assert!((sz.windows[i].im.data()[k] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_contract() {
        let plan = plan_stft(20, 3, 10, WindowFn::Rectangular).unwrap();
        assert!(rstft(&Tensor::zeros(&[1, 21, 1, 1]), &plan).is_err());
        assert!(rstft(&Tensor::zeros(&[1, 20, 1]), &plan).is_err());
    }

    #[test]
    fn scaled_nfft_finds_valid_sizes() {
        for l in [128, 256, 512, 1024] {
            let n = scaled_nfft(l, 4, 0.5).unwrap();
            assert!(plan_stft(l, 4, n, WindowFn::Rectangular).is_ok());
        }
    }
}
