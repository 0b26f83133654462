//! File writers: CSV traces and snapshots, JSON reports, SVG line plots.
//!
//! All numeric output uses fixed formatting so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use fracfront_core::frontmetrics::LevelSetTrace;
use fracfront_core::grid::Field;
use serde::Serialize;

/// `t,x_lambda,lambda` rows for every level.
pub fn trace_csv(traces: &[LevelSetTrace]) -> String {
    let mut out = String::from("t,x_lambda,lambda\n");
    for tr in traces {
        for &(t, x) in &tr.samples {
            let _ = writeln!(out, "{t:.17e},{x:.17e},{}", tr.level);
        }
    }
    out
}

/// `# t=<time> s=<s> kind=<kind>` header, then `x,u` rows.
pub fn snapshot_csv(field: &Field, s: f64, kind: &str) -> String {
    let mut out = format!("# t={} s={s} kind={kind}\nx,u\n", field.time);
    for (i, u) in field.values.iter().enumerate() {
        let _ = writeln!(out, "{:.17e},{u:.17e}", field.grid.x(i));
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// One polyline; `dashed` marks reference curves.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

/// Log-log line plot. Non-positive coordinates are dropped.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, margin) = (640.0, 480.0, 60.0);
    let logs: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| s.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.log10(), p.1.log10())).collect())
        .collect();
    let all = logs.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    let _ = writeln!(out, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, h - 15.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for d in x0.ceil() as i64..=x1.floor() as i64 {
        let x = px(d as f64);
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{}" text-anchor="middle" font-size="11">1e{d}</text>"#, h - margin + 16.0);
    }
    for d in y0.ceil() as i64..=y1.floor() as i64 {
        let y = py(d as f64);
        let _ = writeln!(out, r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="11">1e{d}</text>"#, margin - 4.0);
    }
    for (k, (s, pts)) in series.iter().zip(&logs).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, path.join(" "));
        let ly = margin + 16.0 + 16.0 * k as f64;
        let _ = writeln!(out, r#"<text x="{}" y="{ly}" font-size="12" fill="{color}">{}</text>"#, margin + 8.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
