//! File emission: CSV tables with shortest round-trip float formatting,
//! JSON summaries, and minimal SVG log-log plots. All writers produce
//! byte-stable output for identical inputs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// A rectangular numeric table; one header per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// Render as CSV: '.' decimal separator, '\n' line endings, header row,
    /// values in Rust's shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.headers.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                write!(out, "{v}").expect("string write");
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

pub fn emit_csv(path: &Path, table: &Table) -> io::Result<()> {
    fs::write(path, table.to_csv())
}

/// Pretty JSON with a trailing newline; field order is declaration order and
/// maps are sorted, so bytes are stable.
pub fn emit_summary_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// A labelled series for the log-log scatter plot.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Optional fitted line `log y = intercept + slope * log x`.
    pub fit: Option<(f64, f64)>,
    pub x_label: String,
    pub y_label: String,
    pub title: String,
}

/// Minimal self-contained SVG: frame, decade ticks, scatter points, and the
/// fitted line when present. Only positive data plots on log axes.
pub fn emit_svg_plot(path: &Path, series: &PlotSeries) -> io::Result<()> {
    fs::write(path, render_svg(series))
}

fn render_svg(series: &PlotSeries) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const ML: f64 = 60.0;
    const MR: f64 = 20.0;
    const MT: f64 = 30.0;
    const MB: f64 = 50.0;

    let pts: Vec<(f64, f64)> = series
        .x
        .iter()
        .zip(&series.y)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.log10(), y.log10()))
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="18" text-anchor="middle" font-family="monospace" font-size="13">{}</text>"#,
        W / 2.0,
        series.title
    );

    if pts.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="monospace" font-size="12">no positive data</text>"#,
            W / 2.0,
            H / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let (mut x_lo, mut x_hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let (mut y_lo, mut y_hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad_x = 0.06 * (x_hi - x_lo);
    let pad_y = 0.08 * (y_hi - y_lo);
    x_lo -= pad_x;
    x_hi += pad_x;
    y_lo -= pad_y;
    y_hi += pad_y;

    let to_px = |lx: f64| ML + (lx - x_lo) / (x_hi - x_lo) * (W - ML - MR);
    let to_py = |ly: f64| H - MB - (ly - y_lo) / (y_hi - y_lo) * (H - MT - MB);

    let _ = writeln!(
        svg,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );

    // Decade ticks.
    for d in (x_lo.ceil() as i64)..=(x_hi.floor() as i64) {
        let px = to_px(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{px}" y1="{MT}" x2="{px}" y2="{}" stroke="#cccccc"/><text x="{px}" y="{}" text-anchor="middle" font-family="monospace" font-size="10">1e{d}</text>"##,
            H - MB,
            H - MB + 14.0
        );
    }
    for d in (y_lo.ceil() as i64)..=(y_hi.floor() as i64) {
        let py = to_py(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{ML}" y1="{py}" x2="{}" y2="{py}" stroke="#cccccc"/><text x="{}" y="{}" text-anchor="end" font-family="monospace" font-size="10">1e{d}</text>"##,
            W - MR,
            ML - 4.0,
            py + 3.0
        );
    }

    if let Some((slope, intercept)) = series.fit {
        // Fit is in natural logs; convert to log10 for the axes.
        let ln10 = core::f64::consts::LN_10;
        let fit_y = |lx: f64| (intercept + slope * lx * ln10) / ln10;
        let (x1, x2) = (x_lo + pad_x, x_hi - pad_x);
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#c02020" stroke-width="1.5"/>"##,
            to_px(x1),
            to_py(fit_y(x1)),
            to_px(x2),
            to_py(fit_y(x2))
        );
    }

    for (lx, ly) in &pts {
        let _ = writeln!(
            svg,
            r##"<circle cx="{}" cy="{}" r="3.5" fill="#204080"/>"##,
            to_px(*lx),
            to_py(*ly)
        );
    }

    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="monospace" font-size="11">{}</text>"#,
        (ML + W - MR) / 2.0,
        H - 12.0,
        series.x_label
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="monospace" font-size="11" transform="rotate(-90 14 {})">{}</text>"#,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        series.y_label
    );
    svg.push_str("</svg>\n");
    svg
}
