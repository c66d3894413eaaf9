//! Invariants checked over random inputs.

use hcfreq_core::backbone::{Activation, Backbone, BackboneKind, BackboneParams, BackboneSpec, ComplexLinear, fd_mlp_forward};
use hcfreq_core::data::{make_windows, split_chronological, window_count, Dataset, NormStats};
use hcfreq_core::hc::{cd_multiply, Base, Complex, HcNumber};
use hcfreq_core::model::{Model, ModelConfig};
use hcfreq_core::select::{position_aware_pad, top_m_select};
use hcfreq_core::spectral::{istft, plan_stft, rstft, scaled_nfft, SpectralWindows, StftPlan, WindowFn};
use hcfreq_core::tensor::ComplexTensor;
use hcfreq_core::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn hc(base: Base, r: &mut ChaCha8Rng) -> HcNumber {
    let c = (0..base.components())
        .map(|_| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    HcNumber::new(c).unwrap()
}

fn noise(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_fn(shape, |_| r.random_range(-1.0..1.0))
}

fn base_strategy(max: usize) -> impl Strategy<Value = Base> {
    prop::sample::select(Base::ALL.iter().copied().filter(|b| b.value() <= max).collect::<Vec<_>>())
}

/// A valid plan with lookback up to `max_l`.
fn plan_strategy(max_l: usize) -> impl Strategy<Value = StftPlan> {
    (4..=max_l, 1..=8usize, 0.2..1.0f64, any::<bool>()).prop_filter_map("no valid plan", |(l, p, ratio, hann)| {
        let n = scaled_nfft(l, p, ratio)?;
        plan_stft(l, p, n, if hann { WindowFn::Hann } else { WindowFn::Rectangular }).ok()
    })
}

fn spectrum(plan: &StftPlan, seed: u64) -> SpectralWindows {
    rstft(&noise(&[2, plan.lookback(), 2, 3], seed), plan).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_multiplicative_below_sedenions(base in base_strategy(8), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b) = (hc(base, &mut r), hc(base, &mut r));
        let ab = cd_multiply(&a, &b).unwrap();
        let rel = (ab.norm() - a.norm() * b.norm()).abs() / (a.norm() * b.norm());
        prop_assert!(rel < 1e-9, "{rel}");
    }

    #[test]
    fn left_distributive(base in base_strategy(8), seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (hc(base, &mut r), hc(base, &mut r), hc(base, &mut r));
        let lhs = cd_multiply(&a, &b.add(&c).unwrap()).unwrap();
        let rhs = cd_multiply(&a, &b).unwrap().add(&cd_multiply(&a, &c).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn conjugation_invariants_in_every_base(base in base_strategy(16), seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = hc(base, &mut r);
        prop_assert_eq!(a.conj().conj(), a.clone());
        prop_assert!((a.conj().norm() - a.norm()).abs() < 1e-14);
        let aa = cd_multiply(&a, &a.conj()).unwrap();
        let mut want = HcNumber::zero(base).to_reals();
        want[0] = a.norm() * a.norm();
        prop_assert!(aa.max_abs_diff(&HcNumber::from_reals(&want).unwrap()) < 1e-12);
    }

    #[test]
    fn stft_round_trip(plan in plan_strategy(160), seed in any::<u64>()) {
        let x = noise(&[2, plan.lookback(), 2, 3], seed);
        let back = istft(&rstft(&x, &plan).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x) / x.max_abs() < 1e-6);
    }

    #[test]
    fn stft_is_linear(plan in plan_strategy(96), seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let shape = [1, plan.lookback(), 2, 2];
        let (x, y) = (noise(&shape, seed), noise(&shape, seed ^ 1));
        let mix = Tensor::from_vec(&shape, x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let (sx, sy, sm) = (rstft(&x, &plan).unwrap(), rstft(&y, &plan).unwrap(), rstft(&mix, &plan).unwrap());
        for ((wx, wy), wm) in sx.windows.iter().zip(&sy.windows).zip(&sm.windows) {
            for (plane_x, plane_y, plane_m) in [(&wx.re, &wy.re, &wm.re), (&wx.im, &wy.im, &wm.im)] {
                for ((p, q), m) in plane_x.data().iter().zip(plane_y.data()).zip(plane_m.data()) {
                    prop_assert!((a * p + b * q - m).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn retained_energy_grows_with_m(plan in plan_strategy(64), seed in any::<u64>()) {
        let s = spectrum(&plan, seed);
        let mut last = 0.0;
        for m in 1..=plan.bins() {
            let e = position_aware_pad(&top_m_select(&s, m).unwrap()).unwrap().energy();
            prop_assert!(e >= last - 1e-12);
            last = e;
        }
        prop_assert!((last - s.energy()).abs() <= 1e-12 * s.energy().max(1.0));
        let full = position_aware_pad(&top_m_select(&s, plan.bins()).unwrap()).unwrap();
        prop_assert_eq!(full.windows, s.windows);
    }

    #[test]
    fn selection_is_idempotent(plan in plan_strategy(64), seed in any::<u64>(), frac in 0.0..1.0f64) {
        let s = spectrum(&plan, seed);
        let m = 1 + (frac * (plan.bins() - 1) as f64) as usize;
        let once = top_m_select(&s, m).unwrap();
        let twice = top_m_select(&position_aware_pad(&once).unwrap(), m).unwrap();
        prop_assert_eq!(&once.indices, &twice.indices);
        prop_assert_eq!(&once.windows, &twice.windows);
    }

    #[test]
    fn backbones_are_linear_without_activation_and_bias(
        kind in prop::sample::select(BackboneKind::ALL.to_vec()),
        p in prop::sample::select(vec![2usize, 4]),
        seed in any::<u64>(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let mut spec = BackboneSpec::new(kind, p, 3);
        spec.activation = Activation::Identity;
        let mut params = BackboneParams::init(&spec, &mut rng(seed));
        for bias in &mut params.biases {
            bias.re = Tensor::zeros(bias.re.shape());
            bias.im = Tensor::zeros(bias.im.shape());
        }
        let bb = Backbone::new(spec, params).unwrap();
        let win = |s: u64| -> Vec<ComplexTensor> {
            (0..p as u64).map(|w| ComplexTensor::new(noise(&[2, 3, 1, 3], s + 2 * w), noise(&[2, 3, 1, 3], s + 2 * w + 1)).unwrap()).collect()
        };
        let (x, y) = (win(seed ^ 11), win(seed ^ 23));
        let comb = |u: &Tensor, v: &Tensor| Tensor::from_vec(u.shape(), u.data().iter().zip(v.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let mix: Vec<ComplexTensor> = x.iter().zip(&y).map(|(u, v)| ComplexTensor::new(comb(&u.re, &v.re), comb(&u.im, &v.im)).unwrap()).collect();
        let (fx, fy, fm) = (bb.apply(&x).unwrap(), bb.apply(&y).unwrap(), bb.apply(&mix).unwrap());
        for ((u, v), m) in fx.iter().zip(&fy).zip(&fm) {
            let want = ComplexTensor::new(comb(&u.re, &v.re), comb(&u.im, &v.im)).unwrap();
            prop_assert!(want.max_abs_diff(m) < 1e-10);
        }
    }

    #[test]
    fn hc_pair_with_silent_second_window_is_fd(seed in any::<u64>(), relu in any::<bool>()) {
        let mut spec = BackboneSpec::new(BackboneKind::Hc, 2, 4);
        spec.activation = if relu { Activation::Relu } else { Activation::Identity };
        let params = BackboneParams::init(&spec, &mut rng(seed));
        let x = ComplexTensor::new(noise(&[2, 3, 2, 4], seed ^ 5), noise(&[2, 3, 2, 4], seed ^ 6)).unwrap();
        let out = Backbone::new(spec, params.clone()).unwrap()
            .apply(&[x.clone(), ComplexTensor::zeros(x.shape())]).unwrap();
        let fd = fd_mlp_forward(&x, &ComplexLinear {
            weight: params.weights[0].clone().into(),
            bias: params.biases[0].clone().into(),
        }, spec.activation).unwrap();
        prop_assert_eq!(&out[0], &fd);
    }

    #[test]
    fn forward_maps_b_l_d_to_b_t_d(
        kind in prop::sample::select(vec![BackboneKind::Fd, BackboneKind::Wm, BackboneKind::Hc, BackboneKind::Basic]),
        b in 1..3usize, d in 1..3usize, t in 1..6usize, e in 1..4usize, seed in any::<u64>(),
    ) {
        let plan = plan_stft(12, 2, 8, WindowFn::Rectangular).unwrap();
        let cfg = ModelConfig {
            lookback: 12, horizon: t, channels: d, embed: e, hidden: 5,
            windows: 2, nfft: 8, window_fn: WindowFn::Rectangular, top_m: 3,
            backbone: BackboneSpec::new(kind, 2, e), mask: Default::default(),
        };
        prop_assert_eq!(plan.bins(), 5);
        let m = Model::init(cfg, &mut rng(seed)).unwrap();
        let y = m.forward(&noise(&[b, 12, d], seed)).unwrap();
        prop_assert_eq!(y.shape(), &[b, t, d]);
        prop_assert!(y.is_finite());
    }

    #[test]
    fn normalisation_round_trips(n in 10..80usize, d in 1..4usize, seed in any::<u64>(), scale in 0.01..1e4f64) {
        let ds = Dataset::new("p", noise(&[n, d], seed).map(|v| v * scale), (0..d).map(|c| c.to_string()).collect()).unwrap();
        let s = split_chronological(&ds).unwrap();
        let stats = NormStats::fit(&s.train).unwrap();
        for part in [&s.train, &s.val, &s.test] {
            let back = stats.denormalize(&stats.normalize(part).unwrap()).unwrap();
            prop_assert!(back.values.max_abs_diff(&part.values) <= 1e-12 * scale.max(1.0));
        }
        let tn = stats.normalize(&s.train).unwrap();
        prop_assert!(tn.values.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn splits_tile_the_series_and_windows_stay_inside(n in 10..400usize, l in 1..8usize, t in 1..5usize, stride in 1..4usize) {
        let ds = Dataset::new("p", noise(&[n, 1], n as u64), vec!["c".into()]).unwrap();
        let s = split_chronological(&ds).unwrap();
        prop_assert_eq!(s.train.offset, 0);
        prop_assert_eq!(s.val.offset, s.train.len());
        prop_assert_eq!(s.test.offset, s.train.len() + s.val.len());
        prop_assert_eq!(s.test.offset + s.test.len(), n);
        for part in [&s.train, &s.val, &s.test] {
            match make_windows(part, l, t, stride) {
                Ok(ws) => {
                    prop_assert_eq!(ws.len(), window_count(part.len(), l, t, stride));
                    let last = ws.len() - 1;
                    prop_assert!(ws.start(last) + l + t <= part.len());
                    let (x, y) = ws.batch(&[last]).unwrap();
                    let base = part.offset + ws.start(last);
                    prop_assert_eq!(x.data()[0], ds.values.data()[base]);
                    prop_assert_eq!(y.data()[t - 1], ds.values.data()[base + l + t - 1]);
                }
                Err(_) => prop_assert!(part.len() < l + t),
            }
        }
    }
}
