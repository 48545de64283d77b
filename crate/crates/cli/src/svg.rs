//! Minimal hand-written SVG: line charts, bar charts with error bars, and a
//! fixed orthographic view of the Bloch sphere.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
/// Polylines are thinned to at most this many vertices.
const MAX_POINTS: usize = 2000;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; fitted to the data when absent.
    pub y_range: Option<(f64, f64)>,
}

pub struct Bar {
    pub label: String,
    pub value: Option<f64>,
    pub error: Option<f64>,
}

pub struct BarChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub bars: Vec<Bar>,
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, s: &str) {
    let _ = writeln!(out, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#, escape(s));
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn axes(out: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str, x_ticks: bool) {
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
        f.x0, f.y0, f.w, f.h
    );
    for k in 0..=4 {
        let fy = f.yr.0 + (f.yr.1 - f.yr.0) * k as f64 / 4.0;
        let y = f.py(fy);
        let _ = writeln!(out, r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, f.x0, f.x0 + f.w);
        text(out, f.x0 - 6.0, y + 4.0, "end", &tick_label(fy));
        if x_ticks {
            let fx = f.xr.0 + (f.xr.1 - f.xr.0) * k as f64 / 4.0;
            text(out, f.px(fx), f.y0 + f.h + 16.0, "middle", &tick_label(fx));
        }
    }
    text(out, f.x0 + f.w / 2.0, f.y0 - 14.0, "middle", title);
    text(out, f.x0 + f.w / 2.0, f.y0 + f.h + 38.0, "middle", x_label);
    let (lx, ly) = (f.x0 - 52.0, f.y0 + f.h / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="middle" transform="rotate(-90 {lx:.2} {ly:.2})">{}</text>"#,
        escape(y_label)
    );
}

fn polyline(out: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str, dashed: bool) {
    let mut d = String::new();
    for (x, y) in pts {
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, d.trim_end());
}

fn thin(points: &[(f64, f64)]) -> impl Iterator<Item = &(f64, f64)> {
    let step = points.len().div_ceil(MAX_POINTS).max(1);
    let last = points.len().saturating_sub(1);
    points.iter().enumerate().filter(move |(k, _)| k % step == 0 || *k == last).map(|(_, p)| p)
}

impl LineChart {
    fn draw(&self, out: &mut String, x0: f64, y0: f64, w: f64, h: f64) {
        let xr = span(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let yr = self.y_range.unwrap_or_else(|| span(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1))));
        let f = Frame { x0, y0, w, h, xr, yr };
        axes(out, &f, &self.title, &self.x_label, &self.y_label, true);
        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            polyline(out, thin(&s.points).map(|&(x, y)| (f.px(x), f.py(y))), color, s.dashed);
            let ly = y0 + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                x0 + w - 150.0,
                ly - 4.0,
                x0 + w - 130.0,
                ly - 4.0
            );
            text(out, x0 + w - 125.0, ly, "start", &s.label);
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        open(&mut out, WIDTH, HEIGHT);
        self.draw(&mut out, MARGIN_LEFT, MARGIN_TOP, WIDTH - MARGIN_LEFT - MARGIN_RIGHT, HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);
        out.push_str("</svg>\n");
        out
    }
}

impl BarChart {
    pub fn render(&self) -> String {
        let mut out = String::new();
        open(&mut out, WIDTH, HEIGHT);
        let hi = self.bars.iter().filter_map(|b| b.value.map(|v| v + b.error.unwrap_or(0.0))).fold(0.0f64, f64::max);
        let n = self.bars.len().max(1) as f64;
        let f = Frame {
            x0: MARGIN_LEFT,
            y0: MARGIN_TOP,
            w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
            xr: (0.0, n),
            yr: (0.0, if hi > 0.0 { 1.1 * hi } else { 1.0 }),
        };
        axes(&mut out, &f, &self.title, &self.x_label, &self.y_label, false);
        for (k, bar) in self.bars.iter().enumerate() {
            let centre = k as f64 + 0.5;
            text(&mut out, f.px(centre), f.y0 + f.h + 16.0, "middle", &bar.label);
            let Some(v) = bar.value else {
                text(&mut out, f.px(centre), f.py(0.0) - 4.0, "middle", "n/a");
                continue;
            };
            let (left, right) = (f.px(centre - 0.3), f.px(centre + 0.3));
            let _ = writeln!(
                out,
                r#"<rect x="{left:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.7"/>"#,
                f.py(v),
                right - left,
                f.py(0.0) - f.py(v),
                PALETTE[0]
            );
            if let Some(e) = bar.error {
                let (x, top, bottom) = (f.px(centre), f.py(v + e), f.py((v - e).max(0.0)));
                let _ = writeln!(
                    out,
                    r##"<path d="M{x:.2},{top:.2}V{bottom:.2}M{:.2},{top:.2}H{:.2}M{:.2},{bottom:.2}H{:.2}" stroke="#111" fill="none"/>"##,
                    x - 6.0,
                    x + 6.0,
                    x - 6.0,
                    x + 6.0
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Viewing direction of the Bloch panel: azimuth and elevation in radians.
const VIEW_AZIMUTH: f64 = -0.7853981633974483;
const VIEW_ELEVATION: f64 = 0.35;

fn project(p: [f64; 3]) -> (f64, f64) {
    let (sa, ca) = VIEW_AZIMUTH.sin_cos();
    let (se, ce) = VIEW_ELEVATION.sin_cos();
    let horizontal = -p[0] * sa + p[1] * ca;
    let depth = p[0] * ca + p[1] * sa;
    (horizontal, p[2] * ce - depth * se)
}

/// Bloch-sphere path on the left, `|α|²` against time on the right.
pub fn bloch_figure(title: &str, bloch: &[[f64; 3]], population: &[(f64, f64)]) -> String {
    let (w, h) = (1040.0, 460.0);
    let mut out = String::new();
    open(&mut out, w, h);
    text(&mut out, 200.0, 26.0, "middle", title);

    let (cx, cy, r) = (200.0, 245.0, 170.0);
    let to_px = |(u, v): (f64, f64)| (cx + r * u, cy - r * v);
    let _ = writeln!(out, r##"<circle cx="{cx}" cy="{cy}" r="{r}" fill="none" stroke="#999"/>"##);
    // Equator solid, the two meridians dashed.
    for ring in 0..3 {
        let pts = (0..=96).map(|k| {
            let a = k as f64 / 96.0 * std::f64::consts::TAU;
            let p = match ring {
                0 => [a.cos(), a.sin(), 0.0],
                1 => [0.0, a.cos(), a.sin()],
                _ => [a.cos(), 0.0, a.sin()],
            };
            to_px(project(p))
        });
        polyline(&mut out, pts, "#bbb", ring != 0);
    }
    for (p, label) in [([0.0, 0.0, 1.0], "+"), ([0.0, 0.0, -1.0], "−"), ([1.0, 0.0, 0.0], "x"), ([0.0, 1.0, 0.0], "y")] {
        let (x, y) = to_px(project(p));
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#333"/>"##);
        text(&mut out, x + 8.0, y - 6.0, "start", label);
    }
    let path: Vec<(f64, f64)> = bloch.iter().map(|&p| to_px(project(p))).collect();
    polyline(&mut out, thin(&path).copied(), PALETTE[1], false);
    if let (Some(&start), Some(&end)) = (path.first(), path.last()) {
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"##, start.0, start.1, PALETTE[2]);
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"##, end.0, end.1, PALETTE[0]);
    }

    let chart = LineChart {
        title: "population of |+⟩".into(),
        x_label: "t (s)".into(),
        y_label: "|α|²".into(),
        series: vec![Series::new("|α|²", population.to_vec())],
        y_range: Some((0.0, 1.0)),
    };
    chart.draw(&mut out, 480.0, 50.0, 530.0, 350.0);
    out.push_str("</svg>\n");
    out
}
