//! Cross-checks of the printed product displays against the Cayley–Dickson
//! recursion, plus an STFT round-trip sweep.
//!
//! Each printed display is compared twice: term by term (which signs and
//! conjugations differ) and numerically (largest component deviation over
//! seeded random unit-scale pairs). A row passes only when both agree.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{benchmark_preset, BENCHMARK_PRESETS};
use crate::error::Result;
use crate::hc::table::{printed, ProductTable};
use crate::hc::{cd_multiply, Base, Complex, HcNumber};
use crate::spectral::{istft, plan_stft, rstft, scaled_nfft, StftPlan, WindowFn};
use crate::tensor::Tensor;

pub const ALGEBRA_TOL: f64 = 1e-12;
pub const ROUND_TRIP_TOL: f64 = 1e-6;

/// A printed display and the base it claims to multiply in.
#[derive(Debug, Clone, Copy)]
pub struct Display {
    pub name: &'static str,
    pub base: Base,
    pub rows: &'static [&'static str],
}

pub const DISPLAYS: [Display; 7] = [
    Display { name: "complex", base: Base::Complex, rows: printed::COMPLEX },
    Display { name: "quaternion", base: Base::Quaternion, rows: printed::QUATERNION },
    Display { name: "quaternion_mlp", base: Base::Quaternion, rows: printed::QUATERNION_MLP },
    Display { name: "octonion", base: Base::Octonion, rows: printed::OCTONION },
    Display { name: "octonion_mlp", base: Base::Octonion, rows: printed::OCTONION_MLP },
    Display { name: "sedenion", base: Base::Sedenion, rows: printed::SEDENION },
    Display { name: "sedenion_mlp", base: Base::Sedenion, rows: printed::SEDENION_MLP },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowReport {
    /// 1-based output component.
    pub row: usize,
    pub pass: bool,
    pub max_deviation: f64,
    pub printed: String,
    pub recursion: String,
    /// Terms in the display but not in the recursion, and vice versa.
    pub only_printed: Vec<String>,
    pub only_recursion: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub name: String,
    pub base: Base,
    pub rows: Vec<RowReport>,
}

impl TableReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// 0-based indices of rows that disagree with the recursion.
    pub fn flagged_rows(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| !r.pass).map(|r| r.row - 1).collect()
    }
}

pub fn random_hc<R: Rng + ?Sized>(base: Base, rng: &mut R) -> HcNumber {
    let comps = (0..base.components())
        .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    HcNumber::new(comps).expect("component count matches base")
}

/// Compares `table` with the recursion over `samples` random pairs.
pub fn compare_table(name: &str, table: &ProductTable, samples: usize, seed: u64) -> Result<TableReport> {
    let base = table.base();
    let reference = ProductTable::from_recursion(base);
    let diffs = table.diff(&reference);
    let mut dev = alloc::vec![0.0f64; base.components()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let a = random_hc(base, &mut rng);
        let b = random_hc(base, &mut rng);
        let want = cd_multiply(&a, &b)?;
        let got = table.eval(&a, &b);
        for (k, d) in dev.iter_mut().enumerate() {
            *d = d.max((got.components()[k] - want.components()[k]).norm());
        }
    }
    let rows = diffs
        .into_iter()
        .map(|d| RowReport {
            row: d.row + 1,
            pass: d.is_empty() && dev[d.row] <= ALGEBRA_TOL,
            max_deviation: dev[d.row],
            printed: table.row_string(d.row),
            recursion: reference.row_string(d.row),
            only_printed: d.only_left.iter().map(|t| format!("{t}")).collect(),
            only_recursion: d.only_right.iter().map(|t| format!("{t}")).collect(),
        })
        .collect();
    Ok(TableReport {
        name: name.into(),
        base,
        rows,
    })
}

pub fn display_report(d: &Display, samples: usize, seed: u64) -> Result<TableReport> {
    compare_table(d.name, &ProductTable::parse(d.base, d.rows)?, samples, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTripCase {
    pub label: String,
    pub lookback: usize,
    pub windows: usize,
    pub nfft: usize,
    pub window_fn: WindowFn,
    pub rel_err: f64,
    pub pass: bool,
}

/// `max|istft(rstft(x)) - x| / max|x|` on a seeded random `[2, L, 2, 3]` input.
pub fn round_trip_error(plan: &StftPlan, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_fn(&[2, plan.lookback(), 2, 3], |_| rng.random_range(-1.0..1.0));
    let back = istft(&rstft(&x, plan)?)?;
    Ok(back.max_abs_diff(&x) / x.max_abs())
}

/// Draws a plan that passes the geometry checks.
pub fn random_valid_plan<R: Rng + ?Sized>(rng: &mut R) -> StftPlan {
    loop {
        let l = rng.random_range(8..=256usize);
        let p = rng.random_range(1..=16usize);
        let wf = if rng.random_bool(0.5) { WindowFn::Rectangular } else { WindowFn::Hann };
        let ratio = rng.random_range(0.1..1.0);
        if let Some(n) = scaled_nfft(l, p, ratio) {
            if let Ok(plan) = plan_stft(l, p, n, wf) {
                return plan;
            }
        }
    }
}

/// Round trips for every benchmark preset whose plan is valid, both window
/// functions, followed by `random` seeded random plans.
pub fn round_trip_suite(random: usize, seed: u64) -> Result<Vec<RoundTripCase>> {
    let mut plans: Vec<(String, StftPlan)> = Vec::new();
    for name in BENCHMARK_PRESETS {
        let cfg = benchmark_preset(name).expect("listed preset");
        for wf in [WindowFn::Rectangular, WindowFn::Hann] {
            if let Ok(p) = plan_stft(cfg.lookback, cfg.windows, cfg.nfft, wf) {
                plans.push((format!("preset {name}"), p));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..random {
        plans.push((format!("random #{i}"), random_valid_plan(&mut rng)));
    }
    plans
        .into_iter()
        .enumerate()
        .map(|(i, (label, plan))| {
            let rel_err = round_trip_error(&plan, seed.wrapping_add(i as u64))?;
            Ok(RoundTripCase {
                label,
                lookback: plan.lookback(),
                windows: plan.windows(),
                nfft: plan.nfft(),
                window_fn: plan.window_fn(),
                rel_err,
                pass: rel_err < ROUND_TRIP_TOL,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    /// The recursion compared with itself, one per base.
    pub self_checks: Vec<TableReport>,
    pub displays: Vec<TableReport>,
    pub round_trips: Vec<RoundTripCase>,
}

impl ConformanceReport {
    /// Whether the recursion and the STFT pass; printed displays are
    /// allowed to deviate, since that is what the report documents.
    pub fn core_pass(&self) -> bool {
        self.self_checks.iter().all(TableReport::pass) && self.round_trips.iter().all(|c| c.pass)
    }
}

pub fn run(samples: usize, random_plans: usize, seed: u64) -> Result<ConformanceReport> {
    let self_checks = Base::ALL
        .iter()
        .map(|&b| compare_table("recursion", &ProductTable::from_recursion(b), samples, seed))
        .collect::<Result<_>>()?;
    let displays = DISPLAYS
        .iter()
        .map(|d| display_report(d, samples, seed))
        .collect::<Result<_>>()?;
    Ok(ConformanceReport {
        self_checks,
        displays,
        round_trips: round_trip_suite(random_plans, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(name: &str) -> TableReport {
        let d = DISPLAYS.iter().find(|d| d.name == name).unwrap();
        display_report(d, 200, 1).unwrap()
    }

    #[test]
    fn recursion_agrees_with_itself() {
        for b in Base::ALL {
            let r = compare_table("recursion", &ProductTable::from_recursion(b), 100, 2).unwrap();
            assert!(r.pass());
            assert!(r.rows.iter().all(|row| row.max_deviation <= 1e-14));
        }
    }

    #[test]
    fn complex_display_passes() {
        let r = report("complex");
        assert!(r.pass());
        assert!(r.rows[0].max_deviation <= ALGEBRA_TOL);
    }

    #[test]
    fn octonion_report_lists_every_row() {
        let r = report("octonion");
        assert_eq!(r.rows.len(), 4);
        assert_eq!(r.rows.iter().map(|x| x.row).collect::<Vec<_>>(), [1, 2, 3, 4]);
        for row in &r.rows {
            assert_eq!(row.pass, row.only_printed.is_empty() && row.only_recursion.is_empty());
            if !row.pass {
                assert!(row.max_deviation > ALGEBRA_TOL);
            }
        }
    }

    #[test]
    fn deviations_are_confined_to_flagged_rows() {
        for d in DISPLAYS {
            let r = display_report(&d, 100, 3).unwrap();
            for row in &r.rows {
                if row.pass {
                    assert!(row.max_deviation <= ALGEBRA_TOL, "{} row {}", d.name, row.row);
                }
            }
        }
    }

    #[test]
    fn round_trips_pass() {
        let cases = round_trip_suite(5, 4).unwrap();
        assert_eq!(cases.iter().filter(|c| c.label.starts_with("preset")).count(), 2);
        assert!(cases.iter().all(|c| c.pass), "{cases:?}");
    }
}
