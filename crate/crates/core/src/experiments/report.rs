use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::sqfn::NormSeries;
use crate::{Error, Result};

use super::config::ExperimentConfig;

/// One measured quantity against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, passed: value <= bound }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, passed: value >= bound }
    }

    /// Pass/fail with no numeric margin; value and bound are `1`/`0`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: f64::from(u8::from(ok)), bound: 1.0, passed: ok }
    }
}

/// Outcome of one acceptance criterion, identified as `AC1a`, `AC1b`,
/// `AC2`, …, `AC11`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn new(id: &str, checks: Vec<Check>) -> Self {
        Self { id: id.to_string(), passed: checks.iter().all(|c| c.passed), checks }
    }
}

/// Numeric content of a run. Wall-clock time is kept out of it so that two
/// runs of the same configuration serialize to the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, f64>,
    pub series: Vec<NormSeries>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            name: config.experiment.clone(),
            config: config.clone(),
            metrics: BTreeMap::new(),
            series: Vec::new(),
            verdicts: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub const CSV_HEADER: [&str; 5] = ["n", "alpha", "g_n", "partial_sum", "err_est"];

/// `series.csv`: one row per generation and aperture. The vertical series
/// leaves the aperture empty.
pub fn emit_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for s in &report.series {
        let alpha = s.alpha.map(|a| a.to_string()).unwrap_or_default();
        for i in 0..s.len() {
            w.write_record([
                s.generations[i].to_string(),
                alpha.clone(),
                s.terms[i].to_string(),
                s.partial_sums[i].to_string(),
                s.err_est[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn series_label(s: &NormSeries) -> String {
    match s.alpha {
        Some(a) => format!("alpha = {a}"),
        None => "vertical".to_string(),
    }
}

/// Partial sums against `n + 1` on a logarithmic axis, one polyline per
/// series.
pub fn render_svg(report: &ExperimentReport) -> Result<String> {
    let series: Vec<&NormSeries> = report.series.iter().filter(|s| !s.is_empty()).collect();
    if series.is_empty() {
        return Err(Error::InvalidParams(format!("report `{}` has no series to plot", report.name)));
    }
    let x_max = series
        .iter()
        .flat_map(|s| s.generations.iter())
        .map(|&n| ((n + 1) as f64).ln())
        .fold(0.0, f64::max)
        .max(f64::EPSILON);
    let y_max = series
        .iter()
        .flat_map(|s| s.partial_sums.iter())
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let sx = |n: usize| MARGIN + ((n + 1) as f64).ln() / x_max * (SVG_W - 2.0 * MARGIN);
    let sy = |v: f64| SVG_H - MARGIN - v / y_max * (SVG_H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(out, r#"<title>{} partial sums</title>"#, report.name);
    let _ = writeln!(
        out,
        r#"<path d="M{MARGIN} {MARGIN} V{} H{}" fill="none" stroke="black"/>"#,
        SVG_H - MARGIN,
        SVG_W - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">n + 1 (log scale)</text>"#,
        SVG_W / 2.0,
        SVG_H - 12.0
    );
    let _ = writeln!(out, r#"<text x="8" y="{}" font-size="12">max {y_max:.4e}</text>"#, MARGIN - 10.0);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let label = series_label(s);
        let points: Vec<String> = s
            .generations
            .iter()
            .zip(&s.partial_sums)
            .map(|(&n, &p)| format!("{:.2},{:.2}", sx(n), sy(p)))
            .collect();
        if points.len() == 1 {
            let (n, p) = (s.generations[0], s.partial_sums[0]);
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"><title>{label}</title></circle>"#,
                sx(n),
                sy(p)
            );
        } else {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>{label}</title></polyline>"#,
                points.join(" ")
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{label}</text>"#,
            SVG_W - MARGIN - 90.0,
            MARGIN + 16.0 * k as f64
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg(report: &ExperimentReport, path: &Path) -> Result<()> {
    let svg = render_svg(report)?;
    std::fs::write(path, svg)?;
    Ok(())
}
