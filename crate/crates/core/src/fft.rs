//! Discrete Fourier transforms.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley–Tukey kernel; any
//! other length falls back to the direct O(N²) sum. Transforms are
//! unnormalised in both directions (`inverse` only flips the exponent sign).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::hc::Complex;

fn twiddle(k: usize, n: usize, inverse: bool) -> Complex {
    // reduce the angle index first so large k·n products keep full accuracy
    let ang = 2.0 * PI * ((k % n) as f64) / n as f64;
    let s = if inverse { 1.0 } else { -1.0 };
    Complex::new(libm::cos(ang), s * libm::sin(ang))
}

pub fn dft_naive(input: &[Complex], inverse: bool) -> Vec<Complex> {
    let n = input.len();
    (0..n)
        .map(|k| {
            input
                .iter()
                .enumerate()
                .fold(Complex::new(0.0, 0.0), |acc, (t, &x)| {
                    acc + x * twiddle(k * t, n, inverse)
                })
        })
        .collect()
}

/// In-place radix-2 transform; `buf.len()` must be a power of two.
pub fn fft_radix2(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "radix-2 FFT needs a power-of-two length");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let tw: Vec<Complex> = (0..half).map(|k| twiddle(k, len, inverse)).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * tw[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}

pub fn dft(input: &[Complex], inverse: bool) -> Vec<Complex> {
    if input.len().is_power_of_two() {
        let mut buf = input.to_vec();
        fft_radix2(&mut buf, inverse);
        buf
    } else {
        dft_naive(input, inverse)
    }
}

/// Number of one-sided bins for a real signal of length `n`.
pub fn rfft_bins(n: usize) -> usize {
    n / 2 + 1
}

/// One-sided spectrum of a real signal.
pub fn rfft(x: &[f64]) -> Vec<Complex> {
    let full: Vec<Complex> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut spec = dft(&full, false);
    spec.truncate(rfft_bins(x.len()));
    spec
}

/// Weight of bin `k` when folding a one-sided spectrum back to length `n`.
fn fold_weight(k: usize, n: usize) -> f64 {
    if k == 0 || (n % 2 == 0 && k == n / 2) {
        1.0
    } else {
        2.0
    }
}

/// Real inverse of [`rfft`]. Imaginary parts of the DC and Nyquist bins do
/// not contribute.
pub fn irfft(spec: &[Complex], n: usize) -> Vec<f64> {
    debug_assert_eq!(spec.len(), rfft_bins(n));
    let mut full = vec![Complex::new(0.0, 0.0); n];
    for (k, &c) in spec.iter().enumerate() {
        full[k] = c * fold_weight(k, n);
    }
    dft(&full, true).iter().map(|c| c.re / n as f64).collect()
}

/// Adjoint of [`rfft`] seen as a real-linear map from `n` reals to the
/// (re, im) coordinates of the one-sided bins.
pub fn rfft_adjoint(grad: &[Complex], n: usize) -> Vec<f64> {
    let mut full = vec![Complex::new(0.0, 0.0); n];
    full[..grad.len()].copy_from_slice(grad);
    dft(&full, true).iter().map(|c| c.re).collect()
}

/// Adjoint of [`irfft`].
pub fn irfft_adjoint(grad: &[f64], n: usize) -> Vec<Complex> {
    rfft(grad)
        .into_iter()
        .enumerate()
        .map(|(k, c)| c * (fold_weight(k, n) / n as f64))
        .collect()
}

/// Real-input DFT of a fixed length with the four real-linear maps the
/// STFT pair and its gradients need.
#[derive(Debug, Clone)]
pub struct RealDft {
    n: usize,
    bins: usize,
    kernel: Kernel,
}

#[derive(Debug, Clone)]
enum Kernel {
    Radix2,
    /// `cos`/`sin` tables laid out `[bins][n]`.
    Direct { cos: Vec<f64>, sin: Vec<f64> },
}

impl RealDft {
    pub fn new(n: usize) -> Self {
        let bins = rfft_bins(n);
        let kernel = if n.is_power_of_two() {
            Kernel::Radix2
        } else {
            let mut cos = Vec::with_capacity(bins * n);
            let mut sin = Vec::with_capacity(bins * n);
            for k in 0..bins {
                for t in 0..n {
                    let w = twiddle(k * t, n, true);
                    cos.push(w.re);
                    sin.push(w.im);
                }
            }
            Kernel::Direct { cos, sin }
        };
        Self { n, bins, kernel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn forward(&self, x: &[f64], re: &mut [f64], im: &mut [f64]) {
        match &self.kernel {
            Kernel::Radix2 => {
                for (k, c) in rfft(x).into_iter().enumerate() {
                    re[k] = c.re;
                    im[k] = c.im;
                }
            }
            Kernel::Direct { cos, sin } => {
                for k in 0..self.bins {
                    let (c, s) = (&cos[k * self.n..][..self.n], &sin[k * self.n..][..self.n]);
                    let (mut r, mut i) = (0.0, 0.0);
                    for t in 0..self.n {
                        r += x[t] * c[t];
                        i -= x[t] * s[t];
                    }
                    re[k] = r;
                    im[k] = i;
                }
            }
        }
    }

    pub fn forward_adjoint(&self, g_re: &[f64], g_im: &[f64], out: &mut [f64]) {
        match &self.kernel {
            Kernel::Radix2 => {
                let g: Vec<Complex> = g_re
                    .iter()
                    .zip(g_im)
                    .map(|(&r, &i)| Complex::new(r, i))
                    .collect();
                out.copy_from_slice(&rfft_adjoint(&g, self.n));
            }
            Kernel::Direct { cos, sin } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..self.bins {
                    let (c, s) = (&cos[k * self.n..][..self.n], &sin[k * self.n..][..self.n]);
                    for t in 0..self.n {
                        out[t] += g_re[k] * c[t] - g_im[k] * s[t];
                    }
                }
            }
        }
    }

    pub fn inverse(&self, re: &[f64], im: &[f64], out: &mut [f64]) {
        match &self.kernel {
            Kernel::Radix2 => {
                let spec: Vec<Complex> =
                    re.iter().zip(im).map(|(&r, &i)| Complex::new(r, i)).collect();
                out.copy_from_slice(&irfft(&spec, self.n));
            }
            Kernel::Direct { cos, sin } => {
                let n = self.n as f64;
                out.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..self.bins {
                    let w = fold_weight(k, self.n) / n;
                    let (c, s) = (&cos[k * self.n..][..self.n], &sin[k * self.n..][..self.n]);
                    let (r, i) = (re[k] * w, im[k] * w);
                    for t in 0..self.n {
                        out[t] += r * c[t] - i * s[t];
                    }
                }
            }
        }
    }

    pub fn inverse_adjoint(&self, g: &[f64], re: &mut [f64], im: &mut [f64]) {
        self.forward(g, re, im);
        for k in 0..self.bins {
            let w = fold_weight(k, self.n) / self.n as f64;
            re[k] *= w;
            im[k] *= w;
        }
    }
}
