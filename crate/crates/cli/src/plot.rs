//! Minimal SVG 1.1 writers. Coordinates are printed with fixed precision so
//! the output is stable text.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 48.0;
const BOTTOM: f64 = 64.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

// -0.0 prints as "-0.000" otherwise
fn num(x: f64, prec: usize) -> String {
    format!("{:.*}", prec, x + 0.0)
}

fn tick_label(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-2) {
        format!("{:.2e}", x)
    } else {
        num(x, 3)
    }
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>, pad: f64) -> Range {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if !lo.is_finite() || !hi.is_finite() {
            return Range { lo: -1.0, hi: 1.0 };
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            return Range { lo: lo - 1.0, hi: hi + 1.0 };
        }
        let p = (hi - lo) * pad;
        Range { lo: lo - p, hi: hi + p }
    }

    fn at(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / (TICKS - 1) as f64
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

fn sx(r: Range, v: f64) -> f64 {
    LEFT + r.frac(v) * (W - LEFT - RIGHT)
}

fn sy(r: Range, v: f64) -> f64 {
    H - BOTTOM - r.frac(v) * (H - TOP - BOTTOM)
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="28" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(
        out,
        r#"<path d="M {x0} {y1} L {x0} {y0} L {x1} {y0}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{cy}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 20 {cy})">{}</text>"#,
        escape(ylabel),
        cy = (y0 + y1) / 2.0,
    );
}

fn y_ticks(out: &mut String, r: Range) {
    for i in 0..TICKS {
        let v = r.at(i);
        let y = num(sy(r, v), 2);
        let _ = writeln!(out, r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            LEFT - 8.0,
            tick_label(v)
        );
    }
}

/// Scatter plot of `(x, y)` points.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)]) -> String {
    let xr = Range::of(points.iter().map(|p| p.0), 0.05);
    let yr = Range::of(points.iter().map(|p| p.1), 0.05);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, xlabel, ylabel);
    y_ticks(&mut out, yr);
    for i in 0..TICKS {
        let v = xr.at(i);
        let x = num(sx(xr, v), 2);
        let y0 = H - BOTTOM;
        let _ = writeln!(out, r#"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick_label(v)
        );
    }
    let _ = writeln!(out, r##"<g fill="#1f77b4" fill-opacity="0.7">"##);
    for &(x, y) in points {
        let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="3"/>"#, num(sx(xr, x), 2), num(sy(yr, y), 2));
    }
    out.push_str("</g>\n</svg>\n");
    out
}

/// Vertical bar chart, one bar per label, baseline at zero.
pub fn bars(title: &str, xlabel: &str, ylabel: &str, labels: &[String], values: &[f64]) -> String {
    let top = values.iter().cloned().fold(0.0f64, f64::max);
    let yr = Range {
        lo: 0.0,
        hi: if top > 0.0 { top * 1.1 } else { 1.0 },
    };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, xlabel, ylabel);
    y_ticks(&mut out, yr);
    let slot = (W - LEFT - RIGHT) / labels.len().max(1) as f64;
    let width = slot * 0.7;
    let _ = writeln!(out, r##"<g fill="#4c72b0">"##);
    for (i, &v) in values.iter().enumerate() {
        let x = LEFT + slot * i as f64 + (slot - width) / 2.0;
        let y = sy(yr, v.max(0.0));
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
            num(x, 2),
            num(y, 2),
            num(width, 2),
            num(H - BOTTOM - y, 2)
        );
    }
    out.push_str("</g>\n");
    for (i, label) in labels.iter().enumerate() {
        let x = LEFT + slot * (i as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            num(x, 2),
            H - BOTTOM + 18.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}
