use alloc::vec::Vec;

use super::{cd_multiply, Base, Complex, HcNumber};
use crate::error::{contract, Result};
use crate::tensor::{ComplexTensor, Tensor};

/// A tensor of hyper-complex scalars stored as `base/2` complex planes of
/// one shared shape.
#[derive(Debug, Clone, PartialEq)]
pub struct HcTensor {
    comps: Vec<ComplexTensor>,
}

impl HcTensor {
    pub fn new(comps: Vec<ComplexTensor>) -> Result<Self> {
        Base::from_components(comps.len())?;
        let shape = comps[0].shape();
        if comps.iter().any(|c| c.shape() != shape) {
            return Err(contract!("hyper-complex components disagree in shape"));
        }
        Ok(Self { comps })
    }

    pub fn zeros(base: Base, shape: &[usize]) -> Self {
        Self {
            comps: (0..base.components()).map(|_| ComplexTensor::zeros(shape)).collect(),
        }
    }

    /// `n×n` matrix with the multiplicative identity on the diagonal.
    pub fn identity(base: Base, n: usize) -> Self {
        let mut t = Self::zeros(base, &[n, n]);
        for i in 0..n {
            t.comps[0].re.set(&[i, i], 1.0);
        }
        t
    }

    pub fn base(&self) -> Base {
        Base::from_components(self.comps.len()).expect("validated")
    }

    pub fn shape(&self) -> &[usize] {
        self.comps[0].shape()
    }

    pub fn components(&self) -> &[ComplexTensor] {
        &self.comps
    }

    pub fn get(&self, flat: usize) -> HcNumber {
        HcNumber::new(
            self.comps
                .iter()
                .map(|c| Complex::new(c.re.data()[flat], c.im.data()[flat]))
                .collect(),
        )
        .expect("validated")
    }

    pub fn set(&mut self, flat: usize, v: &HcNumber) {
        for (c, z) in self.comps.iter_mut().zip(v.components()) {
            c.re.data_mut()[flat] = z.re;
            c.im.data_mut()[flat] = z.im;
        }
    }

    pub fn max_abs_diff(&self, other: &HcTensor) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .fold(0.0, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }
}

/// Matrix product over the last axis of `x` and the first axis of a 2-D
/// `w`, with [`cd_multiply`] as the scalar product (input on the left).
pub fn hc_matmul(x: &HcTensor, w: &HcTensor) -> Result<HcTensor> {
    if x.base() != w.base() {
        return Err(contract!("base mismatch: {} vs {}", x.base(), w.base()));
    }
    let (xs, ws) = (x.shape(), w.shape());
    if ws.len() != 2 || xs.is_empty() || xs[xs.len() - 1] != ws[0] {
        return Err(contract!("cannot multiply {:?} by {:?}", xs, ws));
    }
    let (k, n) = (ws[0], ws[1]);
    let rows = xs.iter().product::<usize>() / k;
    let mut out_shape = xs.to_vec();
    *out_shape.last_mut().expect("non-empty") = n;
    let mut out = HcTensor::zeros(x.base(), &out_shape);
    for r in 0..rows {
        for j in 0..n {
            let mut acc = HcNumber::zero(x.base());
            for i in 0..k {
                let prod = cd_multiply(&x.get(r * k + i), &w.get(i * n + j))?;
                acc = acc.add(&prod)?;
            }
            out.set(r * n + j, &acc);
        }
    }
    Ok(out)
}

impl From<ComplexTensor> for HcTensor {
    fn from(c: ComplexTensor) -> Self {
        Self { comps: alloc::vec![c] }
    }
}

impl HcTensor {
    /// Builds a tensor from per-component (re, im) plane pairs.
    pub fn from_planes(planes: Vec<(Tensor, Tensor)>) -> Result<Self> {
        let comps = planes
            .into_iter()
            .map(|(re, im)| ComplexTensor::new(re, im))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }
}
