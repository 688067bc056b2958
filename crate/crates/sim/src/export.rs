//! CSV curves, SVG plots and JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lipdelay_core::experiment::CurvePoint;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::grid::RunResult;
use crate::SimError;

pub const CSV_HEADER: &str = "round,mean_cum_regret,std_cum_regret";

/// Output curves are thinned to this many rounds.
pub const MAX_CURVE_POINTS: usize = 1000;

pub fn csv_string(points: &[CurvePoint]) -> String {
    let mut s = String::with_capacity(32 * (points.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.round, p.mean, p.std);
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<CurvePoint>, SimError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(SimError::Config(format!("expected CSV header `{CSV_HEADER}`")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || SimError::Config(format!("malformed CSV row {}: `{line}`", i + 2));
            let mut fields = line.split(',');
            let mut next = || fields.next().map(str::trim).ok_or_else(bad);
            let round = next()?.parse().map_err(|_| bad())?;
            let mean = next()?.parse().map_err(|_| bad())?;
            let std = next()?.parse().map_err(|_| bad())?;
            Ok(CurvePoint { round, mean, std })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<CurvePoint>, SimError> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_csv(&text).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), SimError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| SimError::io(path, e))
}

/// One labelled curve of a plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round tick step near `span / 5`.
fn tick_step(span: f64) -> f64 {
    if span.is_nan() || span <= 0.0 {
        return 1.0;
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let nice = if m < 1.5 {
        1.0
    } else if m < 3.5 {
        2.0
    } else if m < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Standalone SVG 1.1 line chart of cumulative regret against rounds.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let (w, h) = (860.0, 520.0);
    let (left, right, top, bottom) = (80.0, 250.0, 40.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.round as f64))
        .fold(1.0, f64::max);
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.mean))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - y / y_max);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{left}" y1="{}" x2="{}" y2="{}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}"/></g>"#,
        top + ph,
        left + pw,
        top + ph,
        top + ph
    );

    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="11">"#);
    let xs = tick_step(x_max);
    let mut t = 0.0;
    while t <= x_max + 1e-9 {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"##,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0
        );
        t += xs;
    }
    let ys = tick_step(y_max);
    let mut t = 0.0;
    while t <= y_max + 1e-9 {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/><line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left + pw,
            left - 8.0,
            y + 4.0,
            format_tick(t)
        );
        t += ys;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round</text>"#,
        left + pw / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">mean cumulative regret</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    let _ = writeln!(s, "</g>");

    for (i, series) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for p in &series.points {
            let _ = write!(pts, "{:.2},{:.2} ", sx(p.round as f64), sy(p.mean));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.fract().abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.3}").trim_end_matches('0').to_string()
    }
}

/// Contents of the JSON summary written next to each CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub label: String,
    pub final_mean: f64,
    pub final_std: f64,
    pub finals: Vec<f64>,
    pub wall_time_seconds: f64,
}

impl Summary {
    pub fn of(result: &RunResult) -> Self {
        Summary {
            config: result.config.clone(),
            label: result.config.label(),
            final_mean: result.aggregate.final_mean,
            final_std: result.aggregate.final_std,
            finals: result.aggregate.finals.clone(),
            wall_time_seconds: result.wall_time.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportPaths {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub json: PathBuf,
}

/// Writes `<stem>.csv`, `<stem>.svg` and `<stem>.json` into `dir`.
pub fn export_run(result: &RunResult, dir: &Path) -> Result<ExportPaths, SimError> {
    let stem = result.config.stem();
    let paths = ExportPaths {
        csv: dir.join(format!("{stem}.csv")),
        svg: dir.join(format!("{stem}.svg")),
        json: dir.join(format!("{stem}.json")),
    };
    let points = result.aggregate.subsample(MAX_CURVE_POINTS);
    write(&paths.csv, &csv_string(&points))?;
    let series = [Series { label: result.config.label(), points }];
    let title = format!("{} ({} trials, T = {})", result.config.reward.as_str(), result.config.trials, result.config.horizon);
    write(&paths.svg, &render_svg(&title, &series))?;
    write_json(&paths.json, &Summary::of(result))?;
    Ok(paths)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SimError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| SimError::Failed(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

pub fn write_svg(path: &Path, title: &str, series: &[Series]) -> Result<(), SimError> {
    write(path, &render_svg(title, series))
}
