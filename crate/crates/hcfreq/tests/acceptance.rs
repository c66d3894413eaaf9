//! Acceptance suite: one line per criterion, non-zero exit if a required
//! criterion fails. Criterion 10 is informational and never fails the run.

use std::time::{Duration, Instant};

use hcfreq::config_file;
use hcfreq::manifest::METRICS_FILE;
use hcfreq::pipeline::{load_source, prepare, train_run};
use hcfreq_core::backbone::{count_weight_matrices, BackboneKind, BackboneSpec};
use hcfreq_core::config::{MaskMode, RunConfig};
use hcfreq_core::conformance::{display_report, round_trip_suite, DISPLAYS};
use hcfreq_core::data::{persistence_forecast, MetricsAccumulator, WindowSet};
use hcfreq_core::hc::{
    cd_multiply, explicit_product_complex, explicit_product_oct, explicit_product_quat, explicit_product_sed,
    find_sedenion_zero_divisor, Base, Complex, HcNumber,
};
use hcfreq_core::model::{check_gradients, Model, ModelConfig};
use hcfreq_core::select::{position_aware_pad, top_m_select};
use hcfreq_core::spectral::{plan_stft, rstft, scaled_nfft, WindowFn};
use hcfreq_core::train::{fit, init_rng, FitOptions};
use hcfreq_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALGEBRA_PAIRS: usize = 1000;
const ALGEBRA_TOL: f64 = 1e-12;
const ALGEBRA_BUDGET: Duration = Duration::from_secs(5);
const NORM_TOL: f64 = 1e-9;
const ZERO_DIVISOR_TOL: f64 = 1e-9;
const RANDOM_PLANS: usize = 20;
const ROUND_TRIP_TOL: f64 = 1e-6;
const STFT_BUDGET: Duration = Duration::from_secs(10);
const SELECT_SPECTRA: usize = 100;
const FD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const E2E_IMPROVEMENT: f64 = 0.30;
const E2E_BUDGET: Duration = Duration::from_secs(300);
const MASK_EPOCHS: usize = 3;
const COMPLEXITY_EXPONENT: f64 = 1.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Product = fn(&HcNumber, &HcNumber) -> hcfreq_core::Result<HcNumber>;
type Criterion = (&'static str, fn() -> Outcome, bool);

fn random_hc(base: Base, r: &mut ChaCha8Rng) -> HcNumber {
    let c = (0..base.components())
        .map(|_| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    HcNumber::new(c).unwrap()
}

/// Cayley–Dickson doubling on plain real coordinates, independent of the
/// complex-pair implementation under test.
fn cd_real(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    if n == 1 {
        return vec![a[0] * b[0]];
    }
    let h = n / 2;
    let conj = |v: &[f64]| -> Vec<f64> {
        let mut c: Vec<f64> = v.iter().map(|x| -x).collect();
        c[0] = v[0];
        c
    };
    let (x, y) = a.split_at(h);
    let (u, v) = b.split_at(h);
    let p = cd_real(x, u);
    let q = cd_real(&conj(v), y);
    let r = cd_real(v, x);
    let s = cd_real(y, &conj(u));
    p.iter().zip(&q).map(|(p, q)| p - q).chain(r.iter().zip(&s).map(|(r, s)| r + s)).collect()
}

fn c1_algebra() -> Outcome {
    let t = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for base in Base::ALL {
        for _ in 0..ALGEBRA_PAIRS {
            let (a, b) = (random_hc(base, &mut r), random_hc(base, &mut r));
            let got = cd_multiply(&a, &b).unwrap().to_reals();
            let want = cd_real(&a.to_reals(), &b.to_reals());
            worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(worst, f64::max);
        }
    }
    let oracles: [(&str, Product); 4] = [
        ("complex", explicit_product_complex),
        ("quaternion", explicit_product_quat),
        ("octonion", explicit_product_oct),
        ("sedenion", explicit_product_sed),
    ];
    let mut stray = Vec::new();
    let mut flagged_total = 0;
    for (name, oracle) in oracles {
        let d = DISPLAYS.iter().find(|d| d.name == name).unwrap();
        let flagged = display_report(d, ALGEBRA_PAIRS, 2).unwrap().flagged_rows();
        flagged_total += flagged.len();
        let mut dev = vec![0.0f64; d.base.components()];
        for _ in 0..ALGEBRA_PAIRS {
            let (a, b) = (random_hc(d.base, &mut r), random_hc(d.base, &mut r));
            let (x, y) = (oracle(&a, &b).unwrap(), cd_multiply(&a, &b).unwrap());
            for (k, v) in dev.iter_mut().enumerate() {
                *v = v.max((x.components()[k] - y.components()[k]).norm());
            }
        }
        for (k, v) in dev.iter().enumerate() {
            if *v > ALGEBRA_TOL && !flagged.contains(&k) {
                stray.push(format!("{name} row {}", k + 1));
            }
        }
    }
    let el = t.elapsed();
    outcome(
        worst <= ALGEBRA_TOL && stray.is_empty() && el < ALGEBRA_BUDGET,
        format!(
            "recursion vs real-coordinate oracle max dev {worst:.1e}; display deviations outside flagged rows: {}; {flagged_total} flagged rows; {:.2}s",
            if stray.is_empty() { "none".into() } else { stray.join(", ") },
            el.as_secs_f64()
        ),
    )
}

fn c2_norm() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for base in [Base::Complex, Base::Quaternion, Base::Octonion] {
        for _ in 0..ALGEBRA_PAIRS {
            let (a, b) = (random_hc(base, &mut r), random_hc(base, &mut r));
            let ab = cd_multiply(&a, &b).unwrap().norm();
            worst = worst.max((ab - a.norm() * b.norm()).abs() / (a.norm() * b.norm()));
        }
    }
    let (a, b) = find_sedenion_zero_divisor().unwrap();
    let prod = cd_multiply(&a, &b).unwrap().norm();
    let zd = a.norm() > 0.5 && b.norm() > 0.5 && prod < ZERO_DIVISOR_TOL;
    outcome(
        worst < NORM_TOL && zd,
        format!(
            "max relative norm defect {worst:.1e}; sedenion pair |a|={:.3} |b|={:.3} |ab|={prod:.1e}",
            a.norm(),
            b.norm()
        ),
    )
}

fn c3_stft() -> Outcome {
    let t = Instant::now();
    let cases = round_trip_suite(RANDOM_PLANS, 3).unwrap();
    let el = t.elapsed();
    let presets = cases.iter().filter(|c| c.label.starts_with("preset")).count();
    let worst = cases.iter().map(|c| c.rel_err).fold(0.0, f64::max);
    outcome(
        cases.len() == presets + RANDOM_PLANS && worst < ROUND_TRIP_TOL && el < STFT_BUDGET,
        format!(
            "{presets} preset plans (valid presets, both windows) + {RANDOM_PLANS} random; max rel err {worst:.1e}; {:.2}s",
            el.as_secs_f64()
        ),
    )
}

fn c4_select() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mut identity = true;
    let mut mismatches = 0;
    for _ in 0..SELECT_SPECTRA {
        let (l, p) = (r.random_range(12..=64usize), r.random_range(1..=4usize));
        let Some(n) = scaled_nfft(l, p, r.random_range(0.3..0.9)).filter(|&n| n >= 6) else {
            continue;
        };
        let plan = plan_stft(l, p, n, WindowFn::Rectangular).unwrap();
        let (b, d, e) = (2, 2, 3);
        let x = Tensor::from_fn(&[b, l, d, e], |_| r.random_range(-1.0..1.0));
        let s = rstft(&x, &plan).unwrap();
        let full = position_aware_pad(&top_m_select(&s, plan.bins()).unwrap()).unwrap();
        identity &= full.windows == s.windows;
        for m in [1, 2, 4] {
            let c = top_m_select(&s, m).unwrap();
            for (w, win) in s.windows.iter().enumerate() {
                for bi in 0..b {
                    for di in 0..d {
                        let score = |k: usize| -> f64 {
                            (0..e)
                                .map(|ei| {
                                    let i = ((bi * plan.bins() + k) * d + di) * e + ei;
                                    win.re.data()[i].powi(2) + win.im.data()[i].powi(2)
                                })
                                .sum()
                        };
                        let mut order: Vec<usize> = (0..plan.bins()).collect();
                        order.sort_by(|&i, &j| score(j).partial_cmp(&score(i)).unwrap().then(i.cmp(&j)));
                        let mut want = order[..m].to_vec();
                        want.sort_unstable();
                        if c.indices[w].get(bi, di) != want.as_slice() {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        identity && mismatches == 0,
        format!("M_max round trip bit-exact: {identity}; kept-set mismatches vs sort oracle: {mismatches}"),
    )
}

fn grad_instance(kind: BackboneKind, p: usize) -> (Model, Tensor, Tensor) {
    let (l, nfft, t) = if p == 2 { (8, 4, 4) } else { (10, 4, 4) };
    let cfg = ModelConfig {
        lookback: l,
        horizon: t,
        channels: 1,
        embed: 4,
        hidden: 8,
        windows: p,
        nfft,
        window_fn: WindowFn::Rectangular,
        top_m: 3,
        backbone: BackboneSpec::new(kind, p, 4),
        mask: MaskMode::None,
    };
    let mut r = ChaCha8Rng::seed_from_u64(5 + p as u64);
    let model = Model::init(cfg, &mut r).unwrap();
    let x = Tensor::from_fn(&[1, l, 1], |_| r.random_range(-1.0..1.0));
    let y = Tensor::from_fn(&[1, t, 1], |_| r.random_range(-1.0..1.0));
    (model, x, y)
}

fn c5_gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0f64, String::new());
    let mut instances = 0;
    let cases = [
        (BackboneKind::Hc, 2),
        (BackboneKind::Fd, 2),
        (BackboneKind::Wm, 2),
        (BackboneKind::Basic, 2),
        (BackboneKind::Hc, 4),
        (BackboneKind::Wm, 4),
        (BackboneKind::Basic, 4),
    ];
    for (kind, p) in cases {
        let (model, x, y) = grad_instance(kind, p);
        for g in check_gradients(&model, &x, &y, FD_STEP).unwrap() {
            if g.max_rel_err > worst.0 {
                worst = (g.max_rel_err, format!("{kind} p={p} {}", g.role));
            }
        }
        instances += 1;
    }
    let el = t.elapsed();
    outcome(
        worst.0 < GRAD_TOL && el < GRAD_BUDGET,
        format!(
            "{instances} instances, worst relative error {:.1e} ({}); {:.2}s",
            worst.0,
            worst.1,
            el.as_secs_f64()
        ),
    )
}

fn c6_counts() -> Outcome {
    let hc = count_weight_matrices(BackboneKind::Hc, 4, 1);
    let wm = count_weight_matrices(BackboneKind::Wm, 4, 1);
    let basic = count_weight_matrices(BackboneKind::Basic, 4, 1);
    outcome(
        hc == 4 && wm == 10 && wm == 3 * 4 - 2 && basic == 16,
        format!("p=4: hc {hc}, wm(R=1) {wm}, basic {basic}"),
    )
}

fn persistence_mae(ws: &WindowSet) -> f64 {
    let mut acc = MetricsAccumulator::default();
    for idx in ws.batches(64) {
        let (x, y) = ws.batch(&idx).unwrap();
        let p = persistence_forecast(&x, ws.horizon).unwrap();
        acc.push(p.data(), y.data());
    }
    acc.finish().unwrap().mae
}

fn c7_end_to_end() -> Outcome {
    let cfg = RunConfig::default();
    let t = Instant::now();
    let src = load_source(&cfg).unwrap();
    let prep = prepare(&cfg, &src, None).unwrap();
    let mcfg = ModelConfig::from_run(&cfg, src.dataset.channels()).unwrap();
    let res = fit(mcfg, &prep.train, &prep.val, &FitOptions::from(&cfg), &mut |_, _| {}).unwrap();
    let el = t.elapsed();
    let mae = res.log[res.best_epoch].val_mae;
    let base = persistence_mae(&prep.val);
    let gain = 1.0 - mae / base;
    let mut detail = format!(
        "{} L={} T={} {} p={} {} epochs: val MAE {mae:.4} vs persistence {base:.4} ({:.0}% lower); {:.1}s",
        cfg.synth_kind,
        cfg.lookback,
        cfg.horizon,
        cfg.backbone,
        cfg.windows,
        cfg.epochs,
        100.0 * gain,
        el.as_secs_f64()
    );
    if let Some(path) = std::env::var_os("HCFREQ_ETTH1_CSV") {
        let preset = hcfreq_core::config::benchmark_preset("etth1").unwrap();
        let note = match preset.validate() {
            Ok(()) => format!("ETTh1 preset valid; run `hcfreq train` on {path:?} for the stretch check"),
            Err(e) => format!("ETTh1 stretch check skipped, preset is not runnable: {}", e.root()),
        };
        detail.push_str(&format!("; informational: {note}"));
    }
    outcome(gain >= E2E_IMPROVEMENT && el < E2E_BUDGET, detail)
}

fn c8_masks() -> Outcome {
    let mut failures = Vec::new();
    for mode in MaskMode::ALL {
        let cfg = RunConfig {
            mask: mode,
            epochs: MASK_EPOCHS,
            embed: 8,
            hidden: 32,
            ..RunConfig::default()
        };
        let src = load_source(&cfg).unwrap();
        let prep = prepare(&cfg, &src, None).unwrap();
        let (probe, _) = prep.train.batch(&[0, 1, 2, 3]).unwrap();
        let mcfg = ModelConfig::from_run(&cfg, src.dataset.channels()).unwrap();
        let mut bad: Option<String> = None;
        let res = fit(mcfg, &prep.train, &prep.val, &FitOptions::from(&cfg), &mut |m, model| {
            if bad.is_some() {
                return;
            }
            if !(m.train_loss.is_finite() && m.val_mae.is_finite() && model.params.is_finite()) {
                bad = Some(format!("non-finite in epoch {}", m.epoch));
                return;
            }
            let roles = model.params.roles(&model.cfg.backbone);
            for ((t, masked), role) in model.params.iter().zip(model.params.masked(mode)).zip(roles) {
                if masked && t.max_abs() != 0.0 {
                    bad = Some(format!("{role} nonzero in epoch {}", m.epoch));
                    return;
                }
            }
            let trace = model.trace(&probe).unwrap();
            let leak = trace.selected.iter().any(|p| {
                (mode.input_real() && p.re.max_abs() != 0.0) || (mode.input_imag() && p.im.max_abs() != 0.0)
            });
            if leak {
                bad = Some(format!("masked spectrum nonzero in epoch {}", m.epoch));
            }
        });
        match (res, bad) {
            (Ok(r), None) if r.log.len() == MASK_EPOCHS => {}
            (Ok(_), Some(b)) => failures.push(format!("{mode}: {b}")),
            (Ok(r), None) => failures.push(format!("{mode}: {} epochs", r.log.len())),
            (Err(e), _) => failures.push(format!("{mode}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} modes x {MASK_EPOCHS} epochs, finite, masked tensors exactly zero", MaskMode::ALL.len())
        } else {
            failures.join("; ")
        },
    )
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file::load(
        None,
        &[
            "synth_length=800".into(),
            "lookback=48".into(),
            "horizon=24".into(),
            "nfft=24".into(),
            "embed=8".into(),
            "hidden=32".into(),
            "epochs=3".into(),
            "seed=9".into(),
        ],
        None,
    )
    .unwrap();
    let first = train_run(&cfg, dir.path(), &mut |_| {}).unwrap();
    let replay_cfg = config_file::load(Some(&first.run_dir.join("manifest.json")), &[], None).unwrap();
    let second = train_run(&replay_cfg, dir.path(), &mut |_| {}).unwrap();
    let a = std::fs::read(first.run_dir.join(METRICS_FILE)).unwrap();
    let b = std::fs::read(second.run_dir.join(METRICS_FILE)).unwrap();
    let ck_a = std::fs::read(first.run_dir.join("checkpoint.hcfq")).unwrap();
    let ck_b = std::fs::read(second.run_dir.join("checkpoint.hcfq")).unwrap();
    outcome(
        replay_cfg == cfg && a == b && ck_a == ck_b && first.run_dir != second.run_dir,
        format!(
            "replayed from manifest: metrics log {} bytes identical: {}; checkpoint identical: {}",
            a.len(),
            a == b,
            ck_a == ck_b
        ),
    )
}

fn c10_complexity() -> Outcome {
    let lookbacks = [128usize, 256, 512, 1024];
    let mut points = Vec::new();
    for &l in &lookbacks {
        let nfft = scaled_nfft(l, 4, 0.5).unwrap();
        let cfg = ModelConfig {
            lookback: l,
            horizon: 96,
            channels: 2,
            embed: 16,
            hidden: 64,
            windows: 4,
            nfft,
            window_fn: WindowFn::Rectangular,
            top_m: nfft / 2 + 1,
            backbone: BackboneSpec::new(BackboneKind::Hc, 4, 16),
            mask: MaskMode::None,
        };
        let model = Model::init(cfg, &mut init_rng(10)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(l as u64);
        let x = Tensor::from_fn(&[8, l, 2], |_| r.random_range(-1.0..1.0));
        model.forward(&x).unwrap();
        let mut times: Vec<f64> = (0..5)
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(model.forward(&x).unwrap());
                t.elapsed().as_secs_f64()
            })
            .collect();
        times.sort_by(f64::total_cmp);
        points.push(((l as f64).ln(), times[2].ln()));
    }
    let n = points.len() as f64;
    let (mx, my) = (points.iter().map(|p| p.0).sum::<f64>() / n, points.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let ms: Vec<String> = points.iter().map(|p| format!("{:.2}ms", 1e3 * p.1.exp())).collect();
    outcome(
        slope < COMPLEXITY_EXPONENT,
        format!("forward time at L={lookbacks:?}: {}; log-log exponent {slope:.2}", ms.join(", ")),
    )
}

fn main() {
    // libtest flags such as --list or a name filter are accepted and ignored.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [Criterion; 10] = [
        ("algebra oracle equivalence", c1_algebra, true),
        ("norm multiplicativity", c2_norm, true),
        ("STFT round trip", c3_stft, true),
        ("top-M identity and ordering", c4_select, true),
        ("gradient checks", c5_gradients, true),
        ("parameter counts", c6_counts, true),
        ("end-to-end learning", c7_end_to_end, true),
        ("masking robustness", c8_masks, true),
        ("determinism", c9_determinism, true),
        ("complexity smoke check", c10_complexity, false),
    ];
    let mut failed = 0;
    for (i, (name, f, required)) in criteria.into_iter().enumerate() {
        let o = f();
        let tag = match (o.pass, required) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (informational)",
        };
        println!("criterion {:>2} {name}: {tag} - {}", i + 1, o.detail);
        if !o.pass && required {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} required criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all required criteria passed");
}
