//! Artifacts of a run: `results.csv`, `summary.json` and optional SVG decay plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimates::{render_rows_csv, SweepRow};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments::{ExperimentOutcome, Series};

#[derive(Debug, Serialize)]
struct Summary<'a> {
    pass: bool,
    seed: u64,
    snapped_r: Vec<f64>,
    config: String,
    experiments: Vec<ExperimentSummary<'a>>,
}

#[derive(Debug, Serialize)]
struct ExperimentSummary<'a> {
    experiment: String,
    pass: bool,
    checks: &'a [crate::harness::experiments::Check],
    series: &'a [Series],
}

/// Rows of all outcomes, ordered by `R` then by experiment.
pub fn collect_rows(outcomes: &[ExperimentOutcome]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    rows.sort_by(|a, b| a.r.total_cmp(&b.r));
    rows
}

pub fn summary_json(cfg: &ExperimentConfig, outcomes: &[ExperimentOutcome]) -> Result<String> {
    let summary = Summary {
        pass: outcomes.iter().all(ExperimentOutcome::pass),
        seed: cfg.seed,
        snapped_r: cfg.snapped_r_list(),
        config: cfg.render(),
        experiments: outcomes
            .iter()
            .map(|o| ExperimentSummary { experiment: o.experiment.to_string(), pass: o.pass(), checks: &o.checks, series: &o.series })
            .collect(),
    };
    serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))
}

/// Writes the artifacts into `dir` and returns the paths written.
pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, outcomes: &[ExperimentOutcome], plots: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = dir.join("results.csv");
    fs::write(&csv, render_rows_csv(&collect_rows(outcomes)))?;
    written.push(csv);
    let json = dir.join("summary.json");
    fs::write(&json, summary_json(cfg, outcomes)?)?;
    written.push(json);
    if plots {
        for o in outcomes {
            for (i, s) in o.series.iter().enumerate() {
                if s.points.is_empty() {
                    continue;
                }
                let path = dir.join(format!("{}_{}_{}.svg", o.experiment, i, slug(&s.name)));
                fs::write(&path, decay_svg(s))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn slug(name: &str) -> String {
    let mut out: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    while out.contains("__") {
        out = out.replace("__", "_");
    }
    out.trim_matches('_').to_string()
}

/// `ln value` against `R` with the fitted line, as a standalone SVG document.
pub fn decay_svg(series: &Series) -> String {
    const W: f64 = 480.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    let pts: Vec<(f64, f64)> = series.points.iter().filter(|p| p.1 > 0.0).map(|&(r, v)| (r, v.ln())).collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let title = match &series.fit {
        Some(f) => format!("{} (slope {:.4})", series.name, f.slope),
        None => series.name.clone(),
    };
    let _ = writeln!(svg, r#"<text x="{M}" y="24" font-family="sans-serif" font-size="13">{}</text>"#, escape(&title));
    if pts.is_empty() {
        let _ = writeln!(svg, r#"<text x="{M}" y="{}" font-family="sans-serif" font-size="12">all values zero</text>"#, H / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let (x0, x1) = bounds(pts.iter().map(|p| p.0));
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    if let Some(f) = series.fit {
        ys.extend([f.slope * x0 + f.intercept, f.slope * x1 + f.intercept]);
    }
    let (y0, y1) = bounds(ys.into_iter());
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let _ = writeln!(svg, r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - M, W - M, H - M);
    let _ = writeln!(svg, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">R</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(svg, r#"<text x="8" y="{}" font-family="sans-serif" font-size="11">ln</text>"#, H / 2.0);
    let _ = writeln!(svg, r#"<text x="{M}" y="{}" font-family="sans-serif" font-size="10">{x0:.1}</text>"#, H - M + 14.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10">{x1:.1}</text>"#, W - M - 20.0, H - M + 14.0);
    let _ = writeln!(svg, r#"<text x="4" y="{}" font-family="sans-serif" font-size="10">{y1:.2}</text>"#, M + 4.0);
    let _ = writeln!(svg, r#"<text x="4" y="{}" font-family="sans-serif" font-size="10">{y0:.2}</text>"#, H - M);
    if let Some(f) = series.fit {
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="4 3"/>"#,
            sx(x0),
            sy(f.slope * x0 + f.intercept),
            sx(x1),
            sy(f.slope * x1 + f.intercept)
        );
    }
    for (x, y) in pts {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, sx(x), sy(y));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
