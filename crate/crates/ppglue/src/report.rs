//! results.csv, manifest.json and one SVG log-log plot per fitted quantity.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::RateFit;
use crate::sweep::{CaseStatus, Check, FitOutcome, SweepRun};

pub const CSV_HEADER: &str = "epsilon,quantity,value";

/// One row per (epsilon, quantity): epsilons in config order, quantities
/// sorted. A failed case contributes a single `failed` row holding its exit
/// class (1 validation, 2 numerical).
pub fn csv_string(run: &SweepRun) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in &run.cases {
        if let CaseStatus::Failed { numerical, .. } = &c.status {
            let _ = writeln!(s, "{:.17e},failed,{}", c.epsilon, if *numerical { 2 } else { 1 });
            continue;
        }
        for (k, v) in &c.values {
            let _ = writeln!(s, "{:.17e},{k},{v:.17e}", c.epsilon);
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub epsilon: f64,
    pub quantity: String,
    pub value: f64,
}

pub fn parse_csv(text: &str, origin: &str) -> Result<Vec<CsvRow>> {
    let perr = |line: usize, msg: &str| Error::Parse { path: origin.into(), msg: format!("line {line}: {msg}") };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(perr(1, &format!("expected header {CSV_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(perr(i + 1, "expected three fields"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| perr(i + 1, &format!("bad number {t:?}")));
        rows.push(CsvRow { epsilon: num(parts[0])?, quantity: parts[1].trim().into(), value: num(parts[2])? });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct CaseEntry<'a> {
    epsilon: f64,
    #[serde(flatten)]
    status: &'a CaseStatus,
    quantities: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a crate::config::SweepConfig,
    cases: Vec<CaseEntry<'a>>,
    fits: &'a [FitOutcome],
    checks: Vec<Check>,
    passed: bool,
}

pub fn manifest_string(run: &SweepRun) -> String {
    let checks = run.checks();
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: &run.config,
        cases: run
            .cases
            .iter()
            .map(|c| CaseEntry { epsilon: c.epsilon, status: &c.status, quantities: c.values.len() })
            .collect(),
        fits: &run.fits,
        passed: checks.iter().all(|c| c.pass),
        checks,
    };
    let mut s = serde_json::to_string_pretty(&m).expect("manifest serializes");
    s.push('\n');
    s
}

/// Log10(eps) against log10(value), with the fitted line overlaid.
pub fn svg_plot(fit: &RateFit) -> String {
    let (w, h, pad) = (480.0, 360.0, 56.0);
    let xs: Vec<f64> = fit.epsilons.iter().map(|e| e.log10()).collect();
    let ys: Vec<f64> = fit.values.iter().map(|v| v.log10()).collect();
    let line = |x: f64| (fit.slope * x * std::f64::consts::LN_10 + fit.intercept) / std::f64::consts::LN_10;
    let (x0, x1) = bounds(&xs);
    let mut all_y = ys.clone();
    all_y.extend([line(x0), line(x1)]);
    let (y0, y1) = bounds(&all_y);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{a:.2} {b:.2} L{a:.2} {c:.2} L{d:.2} {c:.2}" stroke="black" fill="none"/>"#,
        a = pad,
        b = pad,
        c = h - pad,
        d = w - pad
    );
    for (x, y) in [(x0, y0), (x1, y1)] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{x:.2}</text>"#, px(x), h - pad + 16.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{y:.2}</text>"#, pad - 4.0, py(y) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">log10(epsilon)</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">log10(value)</text>"#,
        h / 2.0,
        h / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" font-size="13" text-anchor="middle">{} : slope {:.3} (target {:.3}), r2 {:.4}</text>"#,
        w / 2.0,
        fit.quantity,
        fit.slope,
        fit.target,
        fit.r2
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="1.5"/>"#,
        px(x0),
        py(line(x0)),
        px(x1),
        py(line(x1)),
        if fit.pass { "steelblue" } else { "firebrick" }
    );
    for (x, y) in xs.iter().zip(&ys) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="black"/>"#, px(*x), py(*y));
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let m = 0.05 * (hi - lo);
        (lo - m, hi + m)
    }
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf> {
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write every artefact into `dir` (created if missing); returns the paths.
pub fn emit_report(run: &SweepRun, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = vec![
        write(dir.join("results.csv"), &csv_string(run))?,
        write(dir.join("manifest.json"), &manifest_string(run))?,
    ];
    out.extend(write_plots(&run.fits, dir)?);
    Ok(out)
}

pub fn write_plots(fits: &[FitOutcome], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for f in fits {
        if let Some(fit) = &f.fit {
            out.push(write(dir.join(format!("plot_{}.svg", fit.quantity)), &svg_plot(fit))?);
        }
    }
    Ok(out)
}
