//! Top-M frequency compression and position-aware zero padding.
//!
//! Bins are scored per (window, sample, channel) by their squared magnitude
//! summed over the embedding axis; the `M` best survive and their original
//! positions are recorded so padding can put them back. Ties go to the lower
//! bin index, and kept indices are stored in ascending order.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, contract, Result};
use crate::spectral::{SpectralWindows, StftPlan};
use crate::tensor::{ComplexTensor, Tensor};

/// Kept bin positions for one window, laid out `[B][D][M]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinIndex {
    pub batch: usize,
    pub channels: usize,
    pub kept: usize,
    pub data: Vec<usize>,
}

impl BinIndex {
    pub fn get(&self, b: usize, d: usize) -> &[usize] {
        let o = (b * self.channels + d) * self.kept;
        &self.data[o..o + self.kept]
    }

    /// Identity selection over all `bins`.
    pub fn full(batch: usize, channels: usize, bins: usize) -> Self {
        Self {
            batch,
            channels,
            kept: bins,
            data: (0..batch * channels).flat_map(|_| 0..bins).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompressedWindows {
    pub plan: StftPlan,
    /// `[B, M, D, E]` per window.
    pub windows: Vec<ComplexTensor>,
    pub indices: Vec<BinIndex>,
}

impl CompressedWindows {
    pub fn kept(&self) -> usize {
        self.indices.first().map_or(0, |i| i.kept)
    }

    pub fn bins_total(&self) -> usize {
        self.plan.bins()
    }
}

/// Scores `[B, bins, D, E]` planes and returns the kept index lists.
pub(crate) fn select_indices(re: &[f64], im: &[f64], shape: [usize; 4], m: usize) -> BinIndex {
    let [batch, bins, channels, embed] = shape;
    let mut data = Vec::with_capacity(batch * channels * m);
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(bins);
    for b in 0..batch {
        for d in 0..channels {
            scored.clear();
            for j in 0..bins {
                let o = ((b * bins + j) * channels + d) * embed;
                let s: f64 = (0..embed)
                    .map(|e| re[o + e] * re[o + e] + im[o + e] * im[o + e])
                    .sum();
                scored.push((s, j));
            }
            // descending score, then ascending index
            scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            let mut keep: Vec<usize> = scored[..m].iter().map(|&(_, j)| j).collect();
            keep.sort_unstable();
            data.extend_from_slice(&keep);
        }
    }
    BinIndex {
        batch,
        channels,
        kept: m,
        data,
    }
}

/// Copies the kept bins of a `[B, bins, D, E]` buffer into `[B, M, D, E]`.
pub(crate) fn gather(src: &[f64], bins: usize, embed: usize, idx: &BinIndex) -> Vec<f64> {
    let (batch, channels, m) = (idx.batch, idx.channels, idx.kept);
    let mut out = vec![0.0; batch * m * channels * embed];
    for b in 0..batch {
        for d in 0..channels {
            for (k, &j) in idx.get(b, d).iter().enumerate() {
                let so = ((b * bins + j) * channels + d) * embed;
                let oo = ((b * m + k) * channels + d) * embed;
                out[oo..oo + embed].copy_from_slice(&src[so..so + embed]);
            }
        }
    }
    out
}

/// Adds `[B, M, D, E]` values into their bins of a `[B, bins, D, E]` buffer.
pub(crate) fn scatter(src: &[f64], bins: usize, embed: usize, idx: &BinIndex, dst: &mut [f64]) {
    let (channels, m) = (idx.channels, idx.kept);
    for b in 0..idx.batch {
        for d in 0..channels {
            for (k, &j) in idx.get(b, d).iter().enumerate() {
                let so = ((b * m + k) * channels + d) * embed;
                let oo = ((b * bins + j) * channels + d) * embed;
                for e in 0..embed {
                    dst[oo + e] += src[so + e];
                }
            }
        }
    }
}

fn dims4(t: &Tensor) -> Result<[usize; 4]> {
    match *t.shape() {
        [a, b, c, d] => Ok([a, b, c, d]),
        _ => Err(contract!("expected a rank-4 tensor, got {:?}", t.shape())),
    }
}

pub fn top_m_select(s: &SpectralWindows, m: usize) -> Result<CompressedWindows> {
    let bins = s.plan.bins();
    if m == 0 || m > bins {
        return Err(config_err!("top-M must lie in 1..={bins}, got {m}"));
    }
    let mut windows = Vec::with_capacity(s.windows.len());
    let mut indices = Vec::with_capacity(s.windows.len());
    for w in &s.windows {
        let shape = dims4(&w.re)?;
        let [batch, _, channels, embed] = shape;
        let idx = select_indices(w.re.data(), w.im.data(), shape, m);
        let out_shape = [batch, m, channels, embed];
        windows.push(ComplexTensor {
            re: Tensor::from_vec(&out_shape, gather(w.re.data(), bins, embed, &idx))?,
            im: Tensor::from_vec(&out_shape, gather(w.im.data(), bins, embed, &idx))?,
        });
        indices.push(idx);
    }
    Ok(CompressedWindows {
        plan: s.plan.clone(),
        windows,
        indices,
    })
}

pub fn position_aware_pad(c: &CompressedWindows) -> Result<SpectralWindows> {
    let bins = c.bins_total();
    if c.windows.len() != c.indices.len() {
        return Err(contract!("window and index-set counts differ"));
    }
    let mut windows = Vec::with_capacity(c.windows.len());
    for (w, idx) in c.windows.iter().zip(&c.indices) {
        let [batch, m, channels, embed] = dims4(&w.re)?;
        if (idx.batch, idx.kept, idx.channels) != (batch, m, channels) {
            return Err(contract!("index set does not match window shape"));
        }
        if let Some(&bad) = idx.data.iter().find(|&&j| j >= bins) {
            return Err(contract!("bin index {bad} out of range 0..{bins}"));
        }
        let shape = [batch, bins, channels, embed];
        let mut re = vec![0.0; batch * bins * channels * embed];
        let mut im = re.clone();
        scatter(w.re.data(), bins, embed, idx, &mut re);
        scatter(w.im.data(), bins, embed, idx, &mut im);
        windows.push(ComplexTensor {
            re: Tensor::from_vec(&shape, re)?,
            im: Tensor::from_vec(&shape, im)?,
        });
    }
    Ok(SpectralWindows {
        plan: c.plan.clone(),
        windows,
    })
}
