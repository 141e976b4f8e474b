//! Minimal SVG emitter: axes, polylines and bars.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Tick positions with their labels.
    pub x_ticks: Vec<(f64, String)>,
    pub y_ticks: Vec<(f64, String)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn c(v: f64) -> String {
    format!("{v:.2}")
}

struct Frame {
    axes: Axes,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        let (a, b) = self.axes.x_range;
        let t = if b > a { (x - a) / (b - a) } else { 0.5 };
        LEFT + t * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (a, b) = self.axes.y_range;
        let t = if b > a { (y - a) / (b - a) } else { 0.5 };
        H - BOTTOM - t * (H - TOP - BOTTOM)
    }

    fn open(&self, out: &mut String) {
        let a = &self.axes;
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            c((LEFT + W - RIGHT) / 2.0),
            esc(&a.title)
        );
        let (x0, x1) = (self.px(a.x_range.0), self.px(a.x_range.1));
        let (y0, y1) = (self.py(a.y_range.0), self.py(a.y_range.1));
        let _ = writeln!(
            out,
            r#"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="black"/>"#,
            c(x0),
            c(y1),
            c(x0),
            c(y0),
            c(x1),
            c(y0)
        );
        for (v, label) in &a.x_ticks {
            let x = self.px(*v);
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/><text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                c(x),
                c(y0),
                c(x),
                c(y0 + 4.0),
                c(x),
                c(y0 + 16.0),
                esc(label)
            );
        }
        for (v, label) in &a.y_ticks {
            let y = self.py(*v);
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                c(x0),
                c(y),
                c(x1),
                c(y),
                c(x0 - 6.0),
                c(y + 4.0),
                esc(label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            c((x0 + x1) / 2.0),
            c(H - 14.0),
            esc(&a.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            c((y0 + y1) / 2.0),
            c((y0 + y1) / 2.0),
            esc(&a.y_label)
        );
    }

    fn legend(&self, out: &mut String, entries: &[(String, &str)]) {
        for (i, (name, color)) in entries.iter().enumerate() {
            let y = TOP + 8.0 + 18.0 * i as f64;
            let x = W - RIGHT + 14.0;
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                c(x),
                c(y),
                c(x + 18.0),
                c(y),
                c(x + 24.0),
                c(y + 4.0),
                esc(name)
            );
        }
    }
}

/// Evenly spaced ticks over `[lo, hi]` labelled with `decimals` places.
pub fn linear_ticks(lo: f64, hi: f64, n: usize, decimals: usize) -> Vec<(f64, String)> {
    (0..=n)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / n as f64;
            (v, format!("{v:.decimals$}"))
        })
        .collect()
}

pub fn line_chart(axes: Axes, series: &[Series]) -> String {
    let frame = Frame { axes };
    let mut out = String::new();
    frame.open(&mut out);
    let mut legend = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{},{}", c(frame.px(x)), c(frame.py(y))))
            .collect();
        if pts.len() == 1 {
            let (x, y) = pts[0].split_once(',').expect("point");
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        } else if !pts.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                pts.join(" ")
            );
        }
        legend.push((s.name.clone(), color));
    }
    frame.legend(&mut out, &legend);
    out.push_str("</svg>\n");
    out
}

/// One reliability-diagram bar: bin edges, accuracy, mean confidence, count.
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub acc: f64,
    pub conf: f64,
    pub count: usize,
}

pub fn reliability_diagram(title: &str, bins: &[ReliabilityBin]) -> String {
    let frame = Frame {
        axes: Axes {
            title: title.to_string(),
            x_label: "confidence".into(),
            y_label: "accuracy".into(),
            x_range: (0.0, 1.0),
            y_range: (0.0, 1.0),
            x_ticks: linear_ticks(0.0, 1.0, 5, 1),
            y_ticks: linear_ticks(0.0, 1.0, 5, 1),
        },
    };
    let mut out = String::new();
    frame.open(&mut out);
    for b in bins.iter().filter(|b| b.count > 0) {
        let (x0, x1) = (frame.px(b.lo), frame.px(b.hi));
        let (ya, yc, y0) = (frame.py(b.acc), frame.py(b.conf), frame.py(0.0));
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#1f77b4" fill-opacity="0.75" stroke="white"/>"##,
            c(x0),
            c(ya),
            c(x1 - x0),
            c(y0 - ya)
        );
        let (top, bottom) = if ya < yc { (ya, yc) } else { (yc, ya) };
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#d62728" fill-opacity="0.3"/>"##,
            c(x0),
            c(top),
            c(x1 - x0),
            c(bottom - top)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-dasharray="4 3"/>"#,
        c(frame.px(0.0)),
        c(frame.py(0.0)),
        c(frame.px(1.0)),
        c(frame.py(1.0))
    );
    frame.legend(&mut out, &[("accuracy".into(), "#1f77b4"), ("gap".into(), "#d62728"), ("ideal".into(), "black")]);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> Axes {
        Axes {
            title: "t <1>".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_range: (0.0, 10.0),
            y_range: (0.0, 1.0),
            x_ticks: linear_ticks(0.0, 10.0, 2, 0),
            y_ticks: linear_ticks(0.0, 1.0, 2, 1),
        }
    }

    #[test]
    fn line_chart_maps_corners() {
        let s = line_chart(
            axes(),
            &[Series {
                name: "a&b".into(),
                points: vec![(0.0, 0.0), (10.0, 1.0)],
            }],
        );
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains(&format!("{},{} {},{}", c(LEFT), c(H - BOTTOM), c(W - RIGHT), c(TOP))));
        assert!(s.contains("t &lt;1&gt;") && s.contains("a&amp;b"));
    }

    #[test]
    fn reliability_skips_empty_bins() {
        let bins = [
            ReliabilityBin {
                lo: 0.0,
                hi: 0.5,
                acc: 0.2,
                conf: 0.3,
                count: 4,
            },
            ReliabilityBin {
                lo: 0.5,
                hi: 1.0,
                acc: 0.0,
                conf: 0.0,
                count: 0,
            },
        ];
        let s = reliability_diagram("r", &bins);
        assert_eq!(s.matches("fill-opacity=\"0.75\"").count(), 1);
    }
}
