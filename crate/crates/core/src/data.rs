//! Datasets, chronological splits, min-max scaling, sliding windows,
//! metrics and seeded synthetic corpora.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, contract, Result};
use crate::tensor::Tensor;

/// A multivariate series, `values` shaped `[timesteps, channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub values: Tensor,
    pub frequency: String,
    pub channel_names: Vec<String>,
}

impl Dataset {
    pub fn new(name: &str, values: Tensor, channel_names: Vec<String>) -> Result<Self> {
        let [_, d] = dims2(&values)?;
        if channel_names.len() != d {
            return Err(contract!("{} channel names for {d} channels", channel_names.len()));
        }
        if !values.is_finite() {
            return Err(crate::Error::NonFinite(format!("dataset {name:?} contains NaN or infinity")));
        }
        Ok(Self {
            name: name.to_string(),
            values,
            frequency: String::new(),
            channel_names,
        })
    }

    pub fn timesteps(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[1]
    }

    /// Rows `start..end` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Series {
        let d = self.channels();
        Series {
            values: Tensor::from_vec(&[end - start, d], self.values.data()[start * d..end * d].to_vec())
                .expect("row range inside dataset"),
            offset: start,
        }
    }
}

fn dims2(t: &Tensor) -> Result<[usize; 2]> {
    match *t.shape() {
        [n, d] => Ok([n, d]),
        _ => Err(contract!("expected [timesteps, channels], got {:?}", t.shape())),
    }
}

/// A contiguous chunk of a dataset; `offset` is its first row in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub values: Tensor,
    pub offset: usize,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Series,
    pub val: Series,
    pub test: Series,
}

/// 70 % train (rounded down); the rest halves into validation and test,
/// with an odd leftover row going to test.
pub fn split_sizes(n: usize) -> Result<(usize, usize, usize)> {
    if n < 10 {
        return Err(config_err!("need at least 10 timesteps to split, got {n}"));
    }
    let train = n * 7 / 10;
    let rest = n - train;
    Ok((train, rest / 2, rest - rest / 2))
}

pub fn split_chronological(ds: &Dataset) -> Result<Splits> {
    let (a, b, _) = split_sizes(ds.timesteps())?;
    Ok(Splits {
        train: ds.slice(0, a),
        val: ds.slice(a, a + b),
        test: ds.slice(a + b, ds.timesteps()),
    })
}

/// Per-channel minimum and maximum of the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn fit(s: &Series) -> Result<Self> {
        if s.is_empty() {
            return Err(config_err!("cannot fit normalisation on an empty split"));
        }
        let d = s.channels();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in s.values.data().chunks(d) {
            for (c, &v) in row.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Channels whose training range is a single value; they normalise to 0.
    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.min.len()).filter(|&c| self.max[c] == self.min[c]).collect()
    }

    fn check(&self, s: &Series) -> Result<usize> {
        let d = s.channels();
        if d != self.min.len() {
            return Err(contract!("statistics for {} channels applied to {d}", self.min.len()));
        }
        Ok(d)
    }

    pub fn normalize(&self, s: &Series) -> Result<Series> {
        let d = self.check(s)?;
        let values = Tensor::from_fn(s.values.shape(), |i| {
            let c = i % d;
            let span = self.max[c] - self.min[c];
            if span == 0.0 {
                0.0
            } else {
                (s.values.data()[i] - self.min[c]) / span
            }
        });
        Ok(Series { values, offset: s.offset })
    }

    pub fn denormalize(&self, s: &Series) -> Result<Series> {
        let d = self.check(s)?;
        let values = Tensor::from_fn(s.values.shape(), |i| {
            let c = i % d;
            s.values.data()[i] * (self.max[c] - self.min[c]) + self.min[c]
        });
        Ok(Series { values, offset: s.offset })
    }
}

/// Sliding `(x, y)` samples over one series, materialised per batch.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub series: Series,
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
}

pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    if stride == 0 || len < lookback + horizon {
        0
    } else {
        (len - lookback - horizon) / stride + 1
    }
}

pub fn make_windows(series: &Series, lookback: usize, horizon: usize, stride: usize) -> Result<WindowSet> {
    if stride == 0 || lookback == 0 || horizon == 0 {
        return Err(config_err!("lookback, horizon and stride must be positive"));
    }
    if series.len() < lookback + horizon {
        return Err(config_err!(
            "split of length {} is shorter than lookback + horizon = {}",
            series.len(),
            lookback + horizon
        ));
    }
    Ok(WindowSet {
        series: series.clone(),
        lookback,
        horizon,
        stride,
    })
}

impl WindowSet {
    pub fn len(&self) -> usize {
        window_count(self.series.len(), self.lookback, self.horizon, self.stride)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First row of sample `i`, relative to the series.
    pub fn start(&self, i: usize) -> usize {
        i * self.stride
    }

    /// `x: [B, L, D]` and `y: [B, T, D]` for the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let d = self.series.channels();
        let (l, t) = (self.lookback, self.horizon);
        let data = self.series.values.data();
        let mut x = Vec::with_capacity(indices.len() * l * d);
        let mut y = Vec::with_capacity(indices.len() * t * d);
        for &i in indices {
            if i >= self.len() {
                return Err(contract!("sample {i} out of range 0..{}", self.len()));
            }
            let s = self.start(i);
            x.extend_from_slice(&data[s * d..(s + l) * d]);
            y.extend_from_slice(&data[(s + l) * d..(s + l + t) * d]);
        }
        Ok((
            Tensor::from_vec(&[indices.len(), l, d], x)?,
            Tensor::from_vec(&[indices.len(), t, d], y)?,
        ))
    }

    /// Chronological batches of at most `size` samples.
    pub fn batches(&self, size: usize) -> Vec<Vec<usize>> {
        let n = self.len();
        (0..n)
            .step_by(size.max(1))
            .map(|s| (s..(s + size.max(1)).min(n)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
}

pub fn metrics(pred: &Tensor, truth: &Tensor) -> Result<Metrics> {
    if pred.shape() != truth.shape() {
        return Err(contract!("metrics: shapes {:?} and {:?} differ", pred.shape(), truth.shape()));
    }
    if pred.numel() == 0 {
        return Err(contract!("metrics: empty input"));
    }
    let n = pred.numel() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (a, b) in pred.data().iter().zip(truth.data()) {
        abs += (a - b).abs();
        sq += (a - b) * (a - b);
    }
    let mse = sq / n;
    Ok(Metrics {
        mae: abs / n,
        rmse: libm::sqrt(mse),
        mse,
    })
}

/// Streaming sums behind [`Metrics`], for evaluating batch by batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsAccumulator {
    abs: f64,
    sq: f64,
    n: usize,
}

impl MetricsAccumulator {
    pub fn push(&mut self, pred: &[f64], truth: &[f64]) {
        for (a, b) in pred.iter().zip(truth) {
            self.abs += (a - b).abs();
            self.sq += (a - b) * (a - b);
        }
        self.n += pred.len().min(truth.len());
    }

    pub fn finish(&self) -> Result<Metrics> {
        if self.n == 0 {
            return Err(contract!("metrics: no samples"));
        }
        let mse = self.sq / self.n as f64;
        Ok(Metrics {
            mae: self.abs / self.n as f64,
            rmse: libm::sqrt(mse),
            mse,
        })
    }
}

/// Repeats the last lookback value of each channel over the horizon.
pub fn persistence_forecast(x: &Tensor, horizon: usize) -> Result<Tensor> {
    let (b, l, d) = match *x.shape() {
        [b, l, d] if l > 0 => (b, l, d),
        _ => return Err(contract!("persistence needs [B, L, D] with L > 0, got {:?}", x.shape())),
    };
    Ok(Tensor::from_fn(&[b, horizon, d], |i| {
        let (bi, c) = (i / (horizon * d), i % d);
        x.data()[(bi * l + l - 1) * d + c]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    #[default]
    SinusoidMix,
    TrendPlusSeason,
    PiecewiseStationary,
}

impl SynthKind {
    pub const ALL: [SynthKind; 3] = [Self::SinusoidMix, Self::TrendPlusSeason, Self::PiecewiseStationary];

    pub fn name(self) -> &'static str {
        match self {
            Self::SinusoidMix => "sinusoid_mix",
            Self::TrendPlusSeason => "trend_plus_season",
            Self::PiecewiseStationary => "piecewise_stationary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_err!("unknown synthetic corpus {s:?}"))
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to regenerate a synthetic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub seed: u64,
    pub length: usize,
    pub channels: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub dataset: Dataset,
    /// Period of the noiseless `sinusoid_mix` signal, shared by all channels.
    pub period: Option<usize>,
    /// Segment boundaries of `piecewise_stationary`.
    pub change_points: Vec<usize>,
}

pub const MIN_SYNTH_LENGTH: usize = 256;

pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    let SynthSpec {
        kind,
        seed,
        length: n,
        channels: d,
        noise,
    } = *spec;
    if n < MIN_SYNTH_LENGTH {
        return Err(config_err!("synthetic corpora need length >= {MIN_SYNTH_LENGTH}, got {n}"));
    }
    if d == 0 {
        return Err(config_err!("synthetic corpora need at least one channel"));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(config_err!("noise level must be finite and non-negative, got {noise}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * d];
    let mut period = None;
    let mut change_points = Vec::new();
    match kind {
        SynthKind::SinusoidMix => {
            // integer harmonics of one fundamental keep the sum exactly periodic
            let fundamental = rng.random_range(24..=48usize);
            period = Some(fundamental);
            for c in 0..d {
                let tones = rng.random_range(2..=4usize);
                let mut harmonics: Vec<usize> = (1..=6).collect();
                harmonics.shuffle(&mut rng);
                for &h in &harmonics[..tones] {
                    let amp = rng.random_range(0.5..1.5);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    let w = 2.0 * PI * h as f64 / fundamental as f64;
                    for t in 0..n {
                        values[t * d + c] += amp * libm::sin(w * t as f64 + phase);
                    }
                }
            }
        }
        SynthKind::TrendPlusSeason => {
            let season = rng.random_range(24..=48usize);
            for c in 0..d {
                let slope = rng.random_range(-2.0..2.0) / n as f64;
                let amp = rng.random_range(0.5..1.5);
                let phase = rng.random_range(0.0..2.0 * PI);
                for t in 0..n {
                    let s = libm::sin(2.0 * PI * t as f64 / season as f64 + phase);
                    values[t * d + c] = slope * t as f64 + amp * s;
                }
            }
        }
        SynthKind::PiecewiseStationary => {
            let segments = rng.random_range(3..=5usize);
            let min_len = n / (2 * segments);
            let mut cuts: Vec<usize> = Vec::new();
            while cuts.len() < segments - 1 {
                let c = rng.random_range(min_len..n - min_len);
                if cuts.iter().all(|&o| o.abs_diff(c) >= min_len) {
                    cuts.push(c);
                }
            }
            cuts.sort_unstable();
            change_points = cuts.clone();
            let mut bounds = vec![0];
            bounds.extend(cuts);
            bounds.push(n);
            // alternate between low and high frequency bands so that
            // neighbouring segments never share their spectral content
            for (s, seg) in bounds.windows(2).enumerate() {
                let band = if s % 2 == 0 { (40.0, 80.0) } else { (6.0, 14.0) };
                for c in 0..d {
                    let period = rng.random_range(band.0..band.1);
                    let amp = rng.random_range(0.5..1.5);
                    let phase = rng.random_range(0.0..2.0 * PI);
                    for t in seg[0]..seg[1] {
                        values[t * d + c] = amp * libm::sin(2.0 * PI * t as f64 / period + phase);
                    }
                }
            }
        }
    }
    if noise > 0.0 {
        for v in &mut values {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += noise * z;
        }
    }
    let names = (0..d).map(|c| format!("ch{c}")).collect();
    let mut dataset = Dataset::new(kind.name(), Tensor::from_vec(&[n, d], values)?, names)?;
    dataset.frequency = String::from("synthetic");
    Ok(SynthCorpus {
        dataset,
        period,
        change_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, d: usize) -> Dataset {
        let v = Tensor::from_fn(&[n, d], |i| i as f64);
        Dataset::new("ramp", v, (0..d).map(|c| format!("c{c}")).collect()).unwrap()
    }

    #[test]
    fn split_rule() {
        assert_eq!(split_sizes(100).unwrap(), (70, 15, 15));
        assert_eq!(split_sizes(101).unwrap(), (70, 15, 16));
        assert_eq!(split_sizes(10).unwrap(), (7, 1, 2));
        assert!(matches!(split_sizes(9), Err(crate::Error::Config(_))));
        let s = split_chronological(&ramp(57, 2)).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 57);
        assert_eq!(s.val.offset, s.train.len());
        assert_eq!(s.test.offset, s.train.len() + s.val.len());
        assert_eq!(s.test.values.data()[0], (s.test.offset * 2) as f64);
    }

    #[test]
    fn min_max_scaling() {
        let train = Series {
            values: Tensor::from_vec(&[3, 2], vec![0.0, 4.0, 5.0, 4.0, 10.0, 4.0]).unwrap(),
            offset: 0,
        };
        let st = NormStats::fit(&train).unwrap();
        assert_eq!(st.degenerate(), vec![1]);
        let n = st.normalize(&train).unwrap();
        assert_eq!(n.values.data(), &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
        let other = Series {
            values: Tensor::from_vec(&[1, 2], vec![-3.25, 7.5]).unwrap(),
            offset: 3,
        };
        let back = st.denormalize(&st.normalize(&other).unwrap()).unwrap();
        assert!((back.values.data()[0] + 3.25).abs() < 1e-12);
        assert!(st.normalize(&Series { values: Tensor::zeros(&[1, 3]), offset: 0 }).is_err());
    }

    #[test]
    fn window_counting_and_adjacency() {
        assert_eq!(window_count(10, 4, 2, 1), 5);
        assert_eq!(window_count(6, 4, 2, 1), 1);
        assert_eq!(window_count(10, 4, 2, 3), 2);
        let ds = ramp(10, 1);
        let ws = make_windows(&ds.slice(0, 10), 4, 2, 1).unwrap();
        assert_eq!(ws.len(), 5);
        let (x, y) = ws.batch(&[0, 4]).unwrap();
        assert_eq!(x.data(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(y.data(), &[4.0, 5.0, 8.0, 9.0]);
        assert!(ws.batch(&[5]).is_err());
        assert!(make_windows(&ds.slice(0, 5), 4, 2, 1).is_err());
        assert_eq!(ws.batches(2), vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn metric_values() {
        let z = Tensor::zeros(&[2]);
        let e = metrics(&Tensor::from_vec(&[2], vec![1.0, -1.0]).unwrap(), &z).unwrap();
        assert_eq!((e.mae, e.mse, e.rmse), (1.0, 1.0, 1.0));
        let e = metrics(&Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap(), &z).unwrap();
        assert_eq!((e.mae, e.mse), (3.5, 12.5));
        assert_eq!(e.rmse, libm::sqrt(12.5));
        assert_eq!(metrics(&z, &z).unwrap().mae, 0.0);
        assert!(metrics(&z, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn persistence_repeats_last_value() {
        let x = Tensor::from_vec(&[1, 3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let p = persistence_forecast(&x, 2).unwrap();
        assert_eq!(p.data(), &[5.0, 6.0, 5.0, 6.0]);
    }

    fn spec(kind: SynthKind, noise: f64) -> SynthSpec {
        SynthSpec {
            kind,
            seed: 7,
            length: 600,
            channels: 2,
            noise,
        }
    }

    #[test]
    fn synth_is_deterministic() {
        for k in SynthKind::ALL {
            assert_eq!(synth_corpus(&spec(k, 0.1)).unwrap(), synth_corpus(&spec(k, 0.1)).unwrap());
        }
        let mut s = spec(SynthKind::SinusoidMix, 0.0);
        s.length = 100;
        assert!(synth_corpus(&s).is_err());
    }

    #[test]
    fn noiseless_sinusoid_mix_is_periodic() {
        let c = synth_corpus(&spec(SynthKind::SinusoidMix, 0.0)).unwrap();
        let period = c.period.unwrap();
        let v = c.dataset.values.data();
        for ch in 0..2 {
            let x: Vec<f64> = (0..600).map(|t| v[t * 2 + ch]).collect();
            // normalised autocorrelation; equals 1 exactly at multiples of the period
            let acf = |lag: usize| -> f64 {
                let m = x.len() - lag;
                let dot: f64 = (0..m).map(|t| x[t] * x[t + lag]).sum();
                let e0: f64 = x[..m].iter().map(|v| v * v).sum();
                let e1: f64 = x[lag..].iter().map(|v| v * v).sum();
                dot / libm::sqrt(e0 * e1)
            };
            assert!((acf(period) - 1.0).abs() < 1e-9);
            let first = (1..=2 * period).find(|&l| (acf(l) - 1.0).abs() < 1e-9);
            assert_eq!(first, Some(period));
        }
    }

    #[test]
    fn piecewise_segments_have_distinct_spectra() {
        let mut sp = spec(SynthKind::PiecewiseStationary, 0.0);
        sp.length = 1280;
        let c = synth_corpus(&sp).unwrap();
        assert!(!c.change_points.is_empty());
        let v = c.dataset.values.data();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            // total-variation distance between normalised power spectra
            let spec = |x: &[f64]| -> Vec<f64> {
                let n = 64;
                let mut p: Vec<f64> = (0..=n / 2)
                    .map(|k| {
                        let (mut re, mut im) = (0.0, 0.0);
                        for (t, &s) in x[..n].iter().enumerate() {
                            let ang = 2.0 * PI * (k * t) as f64 / n as f64;
                            re += s * libm::cos(ang);
                            im -= s * libm::sin(ang);
                        }
                        re * re + im * im
                    })
                    .collect();
                let tot: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= tot);
                p
            };
            let (pa, pb) = (spec(a), spec(b));
            0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>()
        };
        for &cp in &c.change_points {
            let before: Vec<f64> = (cp - 64..cp).map(|t| v[t * 2]).collect();
            let after: Vec<f64> = (cp..cp + 64).map(|t| v[t * 2]).collect();
            assert!(dist(&before, &after) > 0.5, "change point {cp}");
        }
    }
}
