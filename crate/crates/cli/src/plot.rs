//! Minimal SVG line plots.

use std::fmt::Write;

const COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#17becf", "#d62728", "#9467bd", "#ff7f0e"];
const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 48.0;

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Draw points instead of a polyline.
    pub points: bool,
}

impl Series {
    pub fn line(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Series {
            label: label.into(),
            x,
            y,
            points: false,
        }
    }

    pub fn scatter(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Series {
            points: true,
            ..Series::line(label, x, y)
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Vertical marker lines with a label.
    pub markers: Vec<(f64, String)>,
    pub log_x: bool,
    pub log_y: bool,
}

impl Panel {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Panel {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 5);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn render_panel(out: &mut String, p: &Panel, ox: f64, oy: f64) {
    let tx = |v: f64| if p.log_x { v.log10() } else { v };
    let ty = |v: f64| if p.log_y { v.log10() } else { v };
    let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);
    let xs = p
        .series
        .iter()
        .flat_map(|s| s.x.iter().copied())
        .filter(|&v| usable(v, p.log_x))
        .map(tx);
    let (x0, x1) = range(xs.chain(p.markers.iter().map(|m| tx(m.0)))).unwrap_or((0.0, 1.0));
    let ys = p
        .series
        .iter()
        .flat_map(|s| s.y.iter().copied())
        .filter(|&v| usable(v, p.log_y))
        .map(ty);
    let (y0, y1) = range(ys).unwrap_or((0.0, 1.0));
    let pad = 0.04 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |v: f64| ox + MARGIN_L + (v - x0) / (x1 - x0) * w;
    let py = |v: f64| oy + MARGIN_T + (1.0 - (v - y0) / (y1 - y0)) * h;

    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#333"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        ox + MARGIN_L + w / 2.0,
        oy + 20.0,
        escape(&p.title)
    );
    for t in ticks(x0, x1) {
        let label = if p.log_x { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
        let _ = writeln!(
            out,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#ccc"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle" font-size="11">{4}</text>"##,
            px(t),
            oy + MARGIN_T,
            oy + MARGIN_T + h,
            oy + MARGIN_T + h + 15.0,
            label
        );
    }
    for t in ticks(y0, y1) {
        let label = if p.log_y { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
        let _ = writeln!(
            out,
            r##"<line x1="{0:.1}" y1="{2:.1}" x2="{1:.1}" y2="{2:.1}" stroke="#ccc"/><text x="{3:.1}" y="{4:.1}" text-anchor="end" font-size="11">{5}</text>"##,
            ox + MARGIN_L,
            ox + MARGIN_L + w,
            py(t),
            ox + MARGIN_L - 5.0,
            py(t) + 4.0,
            label
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        ox + MARGIN_L + w / 2.0,
        oy + PANEL_H - 10.0,
        escape(&p.x_label)
    );
    let (lx, ly) = (ox + 16.0, oy + MARGIN_T + h / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
        escape(&p.y_label)
    );
    for (m, label) in &p.markers {
        let x = px(tx(*m));
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#d62728" stroke-dasharray="4 3"/><text x="{:.1}" y="{:.1}" font-size="11" fill="#d62728">{}</text>"##,
            oy + MARGIN_T,
            oy + MARGIN_T + h,
            x + 4.0,
            oy + MARGIN_T + 14.0,
            escape(label)
        );
    }
    for (i, s) in p.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = s
            .x
            .iter()
            .zip(&s.y)
            .filter(|(x, y)| usable(**x, p.log_x) && usable(**y, p.log_y))
            .map(|(x, y)| (px(tx(*x)), py(ty(*y))))
            .collect();
        if s.points {
            for (x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
            }
        } else if !pts.is_empty() {
            let mut d = String::with_capacity(pts.len() * 16);
            for (k, (x, y)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{x:.2},{y:.2}", if k == 0 { "M" } else { " L" });
            }
            let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
        }
        let ly = oy + MARGIN_T + 14.0 + 15.0 * i as f64;
        let lx = ox + MARGIN_L + w - 150.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{ly:.1}" font-size="11">{}</text>"#,
            ly - 9.0,
            lx + 14.0,
            escape(&s.label)
        );
    }
}

/// Lays panels out in a grid of `cols` columns. `comment` is embedded as an
/// XML comment at the top of the document.
pub fn render(panels: &[Panel], cols: usize, comment: &str) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols);
    let width = PANEL_W * cols.min(panels.len()).max(1) as f64;
    let height = PANEL_H * rows.max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, "<!-- {} -->", comment.replace("--", "- -"));
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, (i % cols) as f64 * PANEL_W, (i / cols) as f64 * PANEL_H);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(3.0, 47.0), vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(fmt_tick(0.25), "0.25");
        assert_eq!(fmt_tick(2.5e-7), "2.5e-7");
    }

    #[test]
    fn renders_valid_document() {
        let p = Panel::new("a<b", "x", "y")
            .with(Series::line("s", vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0]))
            .with(Series::scatter("t", vec![1.0], vec![0.5]));
        let svg = render(&[p.clone(), p], 2, "config_hash=abc");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<!-- config_hash=abc -->"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<path").count(), 2);
    }

    #[test]
    fn log_axes_skip_non_positive() {
        let mut p = Panel::new("", "", "").with(Series::line("s", vec![0.0, 1.0, 10.0], vec![1.0, 10.0, 100.0]));
        p.log_x = true;
        p.log_y = true;
        let svg = render(&[p], 1, "");
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
