//! Minimal SVG charts: line and marker series with optional log axes and
//! error bars, and histograms.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric y error bars, one per point.
    pub errors: Option<Vec<f64>>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Series { label: label.into(), points, errors: None, style }
    }

    pub fn with_errors(mut self, errors: Vec<f64>) -> Self {
        self.errors = Some(errors);
        self
    }
}

#[derive(Clone, Debug, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        let pad = 0.05 * (hi - lo);
        Axis { lo: lo - pad, hi: hi + pad, log }
    }

    /// Position in `[0, 1]`, `None` for values a log axis cannot show.
    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                let label = if self.log { format!("1e{t:.1}") } else { format!("{t:.3}") };
                (i as f64 / 4.0, label)
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn render(&self) -> String {
        let xs = Axis::fit(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), self.x_log);
        let ys = Axis::fit(
            self.series.iter().flat_map(|s| {
                let errs = s.errors.clone().unwrap_or_else(|| vec![0.0; s.points.len()]);
                s.points.iter().zip(errs).flat_map(|(p, e)| [p.1 - e, p.1 + e]).collect::<Vec<_>>()
            }),
            self.y_log,
        );
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let px = |f: f64| LEFT + f * pw;
        let py = |f: f64| TOP + (1.0 - f) * ph;
        let mut out = String::new();
        let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for (f, label) in xs.ticks() {
            let _ = writeln!(out, r#"<line x1="{0}" x2="{0}" y1="{1}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#, px(f), TOP + ph, TOP + ph + 5.0, TOP + ph + 18.0, label);
        }
        for (f, label) in ys.ticks() {
            let _ = writeln!(out, r#"<line x1="{0}" x2="{1}" y1="{2}" y2="{2}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"#, LEFT - 5.0, LEFT, py(f), LEFT - 7.0, py(f) + 4.0, label);
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(&self.x_label));
        let _ = writeln!(out, r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">{1}</text>"#, TOP + ph / 2.0, escape(&self.y_label));
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64, usize)> = s
                .points
                .iter()
                .enumerate()
                .filter_map(|(j, &(x, y))| Some((px(xs.frac(x)?), py(ys.frac(y)?), j)))
                .collect();
            match s.style {
                Style::Line => {
                    let d: Vec<String> = pts.iter().map(|(x, y, _)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, d.join(" "));
                }
                Style::Markers => {
                    for (x, y, _) in &pts {
                        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
                    }
                }
            }
            if let Some(errs) = &s.errors {
                for &(x, _, j) in &pts {
                    let y = s.points[j].1;
                    if let (Some(a), Some(b)) = (ys.frac(y - errs[j]), ys.frac(y + errs[j])) {
                        let _ = writeln!(out, r#"<line x1="{x:.2}" x2="{x:.2}" y1="{:.2}" y2="{:.2}" stroke="{color}"/>"#, py(a), py(b));
                    }
                }
            }
            let ly = TOP + 15.0 + 16.0 * i as f64;
            let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#, LEFT + 10.0, ly - 9.0, LEFT + 25.0, ly, escape(&s.label));
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Equal-width histogram of `values`.
pub fn histogram(title: &str, x_label: &str, values: &[f64], bins: usize) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in &finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    // drawn as a step line through bin tops
    let mut points = Vec::with_capacity(2 * bins);
    for (i, &n) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        points.push((a, n as f64));
        points.push((a + width, n as f64));
    }
    Chart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "count".into(),
        series: vec![Series::new(format!("{} samples", finite.len()), points, Style::Line)],
        ..Default::default()
    }
    .render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_documents() {
        let chart = Chart {
            title: "a < b".into(),
            y_log: true,
            series: vec![Series::new("s", vec![(1.0, 1e-3), (2.0, 0.0), (3.0, 1.0)], Style::Markers).with_errors(vec![1e-4; 3])],
            ..Default::default()
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        // the zero is dropped on the log axis
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(histogram("h", "x", &[1.0, 2.0, 2.0, f64::NAN], 4).contains("3 samples"));
    }
}
