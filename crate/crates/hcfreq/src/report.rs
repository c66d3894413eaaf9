//! Plain-text rendering of reports.

use std::fmt::Write;

use hcfreq_core::conformance::{ConformanceReport, TableReport};

use crate::ablate::AblationRow;
use crate::pipeline::HorizonRow;

fn status(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "DEVIATE"
    }
}

fn table_lines(out: &mut String, kind: &str, t: &TableReport, detail: bool) {
    for r in &t.rows {
        let _ = writeln!(
            out,
            "{kind:<9} {:<15} {:<10} row {:>2}  {:<7}  max_dev {:.3e}",
            t.name,
            t.base.to_string(),
            r.row,
            status(r.pass),
            r.max_deviation
        );
        if detail && !r.pass {
            let _ = writeln!(out, "          printed:   {}", r.printed);
            let _ = writeln!(out, "          recursion: {}", r.recursion);
            let _ = writeln!(
                out,
                "          only printed: [{}]  only recursion: [{}]",
                r.only_printed.join(", "),
                r.only_recursion.join(", ")
            );
        }
    }
}

/// One line per table row and per round trip, then a summary.
pub fn conformance_text(rep: &ConformanceReport) -> String {
    let mut out = String::new();
    for t in &rep.self_checks {
        table_lines(&mut out, "recursion", t, true);
    }
    for t in &rep.displays {
        table_lines(&mut out, "display", t, true);
    }
    for c in &rep.round_trips {
        let _ = writeln!(
            out,
            "stft      {:<15} L={:<4} p={:<3} nfft={:<4} {:<12} {:<7}  rel_err {:.3e}",
            c.label,
            c.lookback,
            c.windows,
            c.nfft,
            format!("{:?}", c.window_fn).to_lowercase(),
            status(c.pass),
            c.rel_err
        );
    }
    let flagged: Vec<String> = rep
        .displays
        .iter()
        .filter(|t| !t.pass())
        .map(|t| {
            let rows: Vec<String> = t.flagged_rows().iter().map(|r| (r + 1).to_string()).collect();
            format!("{} (rows {})", t.name, rows.join(", "))
        })
        .collect();
    let _ = writeln!(
        out,
        "summary: recursion {}, stft {}/{} pass, displays deviating: {}",
        status(rep.self_checks.iter().all(TableReport::pass)),
        rep.round_trips.iter().filter(|c| c.pass).count(),
        rep.round_trips.len(),
        if flagged.is_empty() { "none".to_string() } else { flagged.join("; ") }
    );
    out
}

pub fn horizons_text(rows: &[HorizonRow]) -> String {
    let mut out = String::from("horizon        mae       rmse\n");
    for r in rows {
        let _ = writeln!(out, "{:>7} {:>10.6} {:>10.6}", r.horizon, r.mae, r.rmse);
    }
    out
}

pub fn ablation_text(rows: &[AblationRow]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
    let mut out = String::from("sweep      value           status         mae       rmse  weights\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<10} {:<15} {:<6} {:>10} {:>10} {:>8}",
            r.sweep,
            r.sweep_value,
            r.status,
            fmt(r.mae),
            fmt(r.rmse),
            r.weight_matrices
        );
        if let Some(e) = &r.error {
            let _ = writeln!(out, "    error: {}", e.replace('\n', "\n    "));
        }
    }
    out
}
