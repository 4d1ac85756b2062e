//! Static SVG log-log plots of study results.
//!
//! Each refinement sequence becomes one polyline of `E_total` against the
//! refinement parameter (H, τ or micro h). Diverged runs have no finite error
//! and are drawn as upward triangles pinned to the top edge of the frame.
//! Reference triangles of slope 1 and 2 are drawn in data coordinates, so a
//! sequence converging at order k runs parallel to the hypotenuse of the k
//! triangle.

use std::fmt::Write as _;
use std::path::Path;

use wavehmm::study::{fmt_f64, StudyKind, StudyResult, StudyRow};

use crate::output::write_atomic;
use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Plot area in pixels and the decade range it shows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    /// `log10` range of the x axis.
    pub x_decades: (f64, f64),
    pub y_decades: (f64, f64),
    /// Gap between the frame and the data region, which keeps the top edge
    /// free for divergence markers.
    pub inset: f64,
}

impl Frame {
    fn new(x_decades: (f64, f64), y_decades: (f64, f64)) -> Self {
        Self {
            left: 80.0,
            top: 40.0,
            width: WIDTH - 80.0 - 30.0,
            height: HEIGHT - 40.0 - 60.0,
            x_decades,
            y_decades,
            inset: 16.0,
        }
    }

    /// Pixel position of `(log10 x, log10 y)`.
    pub fn map_log(&self, lx: f64, ly: f64) -> (f64, f64) {
        let (x0, x1) = self.x_decades;
        let (y0, y1) = self.y_decades;
        let d = self.inset;
        (
            self.left + d + (lx - x0) / (x1 - x0) * (self.width - 2.0 * d),
            self.top + d + (y1 - ly) / (y1 - y0) * (self.height - 2.0 * d),
        )
    }

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        self.map_log(x.log10(), y.log10())
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }
}

/// One plotted refinement sequence.
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    diverged: Vec<f64>,
}

fn series_label(kind: StudyKind, r: &StudyRow) -> String {
    let mut label = r.study.clone();
    if let Some(s) = r.scheme {
        let _ = write!(label, " {}", s.name());
    }
    if let Some(p) = r.p {
        let _ = write!(label, " p={p}");
    }
    if let (Some(n), false) = (r.micro_n, r.study.starts_with("micro")) {
        let _ = write!(label, " n={n}");
    }
    match kind {
        StudyKind::Space | StudyKind::Plateau => {
            if let Some(t) = r.tau {
                let _ = write!(label, " tau={}", fmt_f64(t));
            }
        }
        StudyKind::Time => {
            if let Some(h) = r.h {
                let _ = write!(label, " H={}", fmt_f64(h));
            }
        }
        StudyKind::Micro => {
            if r.study == "micro_delta" {
                if let Some(n) = r.micro_n {
                    let _ = write!(label, " n={n}");
                }
            } else if let Some(d) = r.delta {
                let _ = write!(label, " delta={}", fmt_f64(d));
            }
        }
    }
    label
}

fn x_axis_label(kind: StudyKind) -> &'static str {
    match kind {
        StudyKind::Space | StudyKind::Plateau => "macro mesh size H",
        StudyKind::Time => "time step tau",
        StudyKind::Micro => "micro mesh size h (or cell size delta)",
    }
}

fn collect(result: &StudyResult) -> (Vec<Series>, Vec<f64>) {
    let mut series: Vec<Series> = Vec::new();
    let mut levels = Vec::new();
    for r in &result.rows {
        if r.study == "tensor_level" {
            if r.e_total.is_finite() && r.e_total > 0.0 {
                levels.push(r.e_total);
            }
            continue;
        }
        let usable_x = r.parameter > 0.0 && r.parameter.is_finite();
        let point = usable_x && r.e_total.is_finite() && r.e_total > 0.0;
        let diverged = usable_x && r.diverged;
        if !point && !diverged {
            continue;
        }
        let label = series_label(result.kind, r);
        let idx = match series.iter().position(|s| s.label == label) {
            Some(i) => i,
            None => {
                series.push(Series {
                    label,
                    points: Vec::new(),
                    diverged: Vec::new(),
                });
                series.len() - 1
            }
        };
        if point {
            series[idx].points.push((r.parameter, r.e_total));
        } else {
            series[idx].diverged.push(r.parameter);
        }
    }
    (series, levels)
}

/// Whole decades enclosing `values`, at least one decade wide.
fn decade_range(values: impl Iterator<Item = f64>, fallback: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let l = v.log10();
        (lo.min(l), hi.max(l))
    });
    if !lo.is_finite() {
        return fallback;
    }
    let (lo, mut hi) = (lo.floor(), hi.ceil());
    if hi <= lo {
        hi = lo + 1.0;
    }
    (lo, hi)
}

fn num(x: f64) -> String {
    format!("{x:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Vertices of the slope triangle of `order` with its right angle at the
/// lower right: `(x0, y0)`, `(x0 + run, y0)`, `(x0 + run, y0 + order·run)` in
/// decades.
pub fn slope_triangle(frame: &Frame, order: f64) -> [(f64, f64); 3] {
    let (x0, x1) = frame.x_decades;
    let (y0, y1) = frame.y_decades;
    let run = (0.15 * (x1 - x0)).min(0.35 * (y1 - y0) / 2.0);
    let start = x0 + if order == 1.0 { 0.62 } else { 0.80 } * (x1 - x0) - run / 2.0;
    let base = y0 + 0.06 * (y1 - y0);
    [
        frame.map_log(start, base),
        frame.map_log(start + run, base),
        frame.map_log(start + run, base + order * run),
    ]
}

/// Renders the plot. Fails when no row has a finite positive error or a
/// divergence flag at a positive parameter.
pub fn render_svg(result: &StudyResult) -> Result<String, CliError> {
    let (series, levels) = collect(result);
    if series.is_empty() {
        return Err(CliError::Usage("nothing to plot: no finite errors or diverged runs".into()));
    }
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0).chain(s.diverged.iter().copied()));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(levels.iter().copied());
    let frame = Frame::new(decade_range(xs, (-1.0, 0.0)), decade_range(ys, (-3.0, 0.0)));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{} study: E_total (log-log)</text>"#,
        num(frame.left + frame.width / 2.0),
        result.kind.name()
    );
    let _ = writeln!(
        svg,
        r#"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(frame.left),
        num(frame.top),
        num(frame.width),
        num(frame.height)
    );
    // decade ticks and grid
    let (x0, x1) = frame.x_decades;
    for d in (x0 as i32)..=(x1 as i32) {
        let (px, _) = frame.map_log(d as f64, frame.y_decades.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#ddd"/><text x="{0}" y="{3}" text-anchor="middle">1e{d}</text>"##,
            num(px),
            num(frame.top),
            num(frame.bottom()),
            num(frame.bottom() + 16.0)
        );
    }
    let (y0, y1) = frame.y_decades;
    for d in (y0 as i32)..=(y1 as i32) {
        let (_, py) = frame.map_log(x0, d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="#ddd"/><text x="{3}" y="{4}" text-anchor="end">1e{d}</text>"##,
            num(frame.left),
            num(frame.left + frame.width),
            num(py),
            num(frame.left - 6.0),
            num(py + 4.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        num(frame.left + frame.width / 2.0),
        num(HEIGHT - 14.0),
        x_axis_label(result.kind)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">E_total</text>"#,
        num(frame.top + frame.height / 2.0)
    );

    for level in &levels {
        let (_, py) = frame.map_log(x0, level.log10());
        let _ = writeln!(
            svg,
            r#"<line class="tensor-level" x1="{}" y1="{2}" x2="{}" y2="{2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            num(frame.left),
            num(frame.left + frame.width),
            num(py)
        );
    }

    for order in [1.0, 2.0] {
        let tri = slope_triangle(&frame, order);
        let pts: Vec<String> = tri.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="slope-{order}" points="{}" fill="none" stroke="black"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="start">{order}</text>"#,
            num(tri[2].0 + 4.0),
            num((tri[1].1 + tri[2].1) / 2.0 + 4.0)
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(svg, r#"<g class="series" stroke="{color}" fill="{color}">"#);
        let pixels: Vec<(f64, f64)> = s.points.iter().map(|&(x, y)| frame.map(x, y)).collect();
        if pixels.len() > 1 {
            let path: Vec<String> = pixels.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
            let _ = writeln!(svg, r#"<polyline points="{}" fill="none"/>"#, path.join(" "));
        }
        for (x, y) in &pixels {
            let _ = writeln!(svg, r#"<circle class="point" cx="{}" cy="{}" r="3"/>"#, num(*x), num(*y));
        }
        for &x in &s.diverged {
            let (px, _) = frame.map_log(x.log10(), y1);
            let _ = writeln!(
                svg,
                r#"<polygon class="diverged" points="{0},{1} {2},{3} {4},{3}"/>"#,
                num(px),
                num(frame.top),
                num(px - 5.0),
                num(frame.top + 9.0),
                num(px + 5.0)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" stroke="none" text-anchor="start">{}{}</text>"#,
            num(frame.left + 8.0),
            num(frame.top + 28.0 + 16.0 * i as f64),
            escape(&s.label),
            if s.diverged.is_empty() { "" } else { " (diverged at top)" }
        );
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders and writes the plot atomically; nothing is written on error.
pub fn emit_plot(result: &StudyResult, path: &Path) -> Result<(), CliError> {
    let svg = render_svg(result)?;
    write_atomic(path, svg.as_bytes())
}
