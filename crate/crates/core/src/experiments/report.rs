//! Sweep reports: a comma-separated data table with a fixed header, a
//! `#`-prefixed summary block and an optional SVG plot.
//!
//! Data rows hold only seed-determined quantities, so two runs of the same
//! configuration produce byte-identical rows. Wall-clock timings live in the
//! summary block.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "rate,eps_w,seed,normalized_error,success,cost";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate: f64,
    pub eps_w: f64,
    pub seed: u64,
    pub normalized_error: f64,
    pub success: bool,
    pub cost: f64,
}

impl SweepRow {
    /// Orders rows by `(rate, eps_w, seed)`.
    pub fn order_key(&self, other: &Self) -> Ordering {
        self.rate
            .total_cmp(&other.rate)
            .then(self.eps_w.total_cmp(&other.eps_w))
            .then(self.seed.cmp(&other.seed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub rate: f64,
    pub eps_w: f64,
    pub trials: usize,
    pub success_fraction: f64,
    pub mean_error: f64,
    pub mean_runtime_ms: f64,
}

/// Threshold diagnostic of a robustness sweep for one `eps_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub eps_w: f64,
    /// Smallest swept rate with at least 90% success, if any.
    pub rate: Option<f64>,
    /// Unperturbed threshold plus `3 eps_w`, if the unperturbed curve has one.
    pub budget: Option<f64>,
    /// `(1 + delta)(entropy rate per bit + 3 eps_w)`.
    pub predicted: f64,
}

impl ThresholdRow {
    /// Threshold shift relative to an unperturbed threshold.
    pub fn shift_from(&self, base: Option<f64>) -> Option<f64> {
        Some(self.rate? - base?)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
    pub thresholds: Vec<ThresholdRow>,
}

impl SweepReport {
    pub fn cell(&self, rate: f64, eps_w: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.rate == rate && c.eps_w == eps_w)
    }

    pub fn success_fraction(&self, rate: f64, eps_w: f64) -> Option<f64> {
        self.cell(rate, eps_w).map(|c| c.success_fraction)
    }

    pub fn threshold(&self, eps_w: f64) -> Option<&ThresholdRow> {
        self.thresholds.iter().find(|t| t.eps_w == eps_w)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Renders the table; the summary block is present only when there are rows.
pub fn format_report(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.rate, r.eps_w, r.seed, r.normalized_error, r.success as u8, r.cost
        );
    }
    if !report.rows.is_empty() {
        out.push_str("# summary\n");
        out.push_str("# rate,eps_w,trials,success_fraction,mean_error,mean_runtime_ms\n");
        for c in &report.cells {
            let _ = writeln!(
                out,
                "# {},{},{},{},{},{:.3}",
                c.rate, c.eps_w, c.trials, c.success_fraction, c.mean_error, c.mean_runtime_ms
            );
        }
    }
    if !report.thresholds.is_empty() {
        out.push_str("# thresholds\n");
        out.push_str("# eps_w,threshold_rate,budget_rate,predicted_rate\n");
        for t in &report.thresholds {
            let _ = writeln!(
                out,
                "# {},{},{},{}",
                t.eps_w,
                opt(t.rate),
                opt(t.budget),
                t.predicted
            );
        }
    }
    out
}

pub fn emit_report(report: &SweepReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format_report(report))?;
    Ok(())
}

/// Parses the data rows of a report; `#` lines are skipped.
pub fn parse_report(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == REPORT_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {REPORT_HEADER:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, got {}", fields.len())));
        }
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| err(format!("not a number: {s:?}")))
        };
        rows.push(SweepRow {
            rate: float(fields[0])?,
            eps_w: float(fields[1])?,
            seed: fields[2]
                .parse()
                .map_err(|_| err(format!("not a seed: {:?}", fields[2])))?,
            normalized_error: float(fields[3])?,
            success: match fields[4] {
                "1" => true,
                "0" => false,
                other => return Err(err(format!("success flag must be 0 or 1, got {other:?}"))),
            },
            cost: float(fields[5])?,
        });
    }
    Ok(rows)
}

pub fn read_report(path: &Path) -> Result<Vec<SweepRow>> {
    parse_report(&std::fs::read_to_string(path)?)
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Success fraction against sampling rate, one polyline per `eps_w`.
pub fn render_plot(report: &SweepReport) -> String {
    let (w, h, margin) = (480.0, 360.0, 50.0);
    let px = |rate: f64| margin + rate * (w - 2.0 * margin);
    let py = |frac: f64| h - margin - frac * (h - 2.0 * margin);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#,
        x0 = px(0.0),
        x1 = px(1.0),
        y0 = py(0.0),
        y1 = py(1.0)
    );
    for tick in 0..=5 {
        let t = tick as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#,
            px(t),
            py(0.0) + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{t}</text>"#,
            px(0.0) - 6.0,
            py(t) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">sampling rate m/n</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">success fraction</text>"#,
        h / 2.0,
        h / 2.0
    );
    let mut eps_values: Vec<f64> = report.cells.iter().map(|c| c.eps_w).collect();
    eps_values.sort_by(f64::total_cmp);
    eps_values.dedup();
    for (i, eps) in eps_values.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points: Vec<(f64, f64)> = report
            .cells
            .iter()
            .filter(|c| c.eps_w == *eps)
            .map(|c| (c.rate, c.success_fraction))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = points
            .iter()
            .map(|&(r, f)| format!("{:.2},{:.2}", px(r), py(f)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(r, f) in &points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(r),
                py(f)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">eps_w = {eps}</text>"#,
            px(0.05),
            py(1.0) + 14.0 * (i as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(report: &SweepReport, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, render_plot(report))?;
    Ok(())
}
