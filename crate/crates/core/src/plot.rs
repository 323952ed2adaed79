//! Standalone SVG views of reports. Every data label uses [`fmt_metric`], so
//! the numbers drawn are exactly the numbers in the CSV files.

use crate::metrics::{GroupKey, MetricsReport, TrendSeries};
use crate::report::fmt_metric;
use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"12\"";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Red (0) to green (1).
fn color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let r = (215.0 * (1.0 - v) + 40.0 * v) as u8;
    let g = (48.0 * (1.0 - v) + 160.0 * v) as u8;
    let b = (39.0 * (1.0 - v) + 70.0 * v) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn distinct(values: impl Iterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Law × identity-type grid of LSS values; cells without scoreable samples
/// are drawn gray and labelled `n/a`.
pub fn heatmap_svg(report: &MetricsReport, title: &str) -> String {
    let key = |cell: &crate::metrics::GroupCell, k| cell.key.get(&k).cloned().unwrap_or_default();
    let laws = distinct(report.groups.iter().map(|c| key(c, GroupKey::LawId)));
    let types = distinct(report.groups.iter().map(|c| key(c, GroupKey::IdentityType)));
    let (cw, ch, left, top) = (110.0, 28.0, 110.0, 60.0);
    let width = left + cw * types.len() as f64 + 20.0;
    let height = top + ch * laws.len() as f64 + 20.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<text x="{left}" y="20" {FONT} font-weight="bold">{}</text>"#, esc(title));
    for (j, t) in types.iter().enumerate() {
        let x = left + cw * (j as f64 + 0.5);
        let _ = writeln!(svg, r#"<text x="{x}" y="{}" {FONT} text-anchor="middle">{}</text>"#, top - 8.0, esc(t));
    }
    for (i, law) in laws.iter().enumerate() {
        let y = top + ch * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" {FONT} text-anchor="end">{}</text>"#,
            left - 8.0,
            y + ch * 0.65,
            esc(law)
        );
        for (j, t) in types.iter().enumerate() {
            let x = left + cw * j as f64;
            let cell = report
                .groups
                .iter()
                .find(|c| &key(c, GroupKey::LawId) == law && &key(c, GroupKey::IdentityType) == t);
            let (fill, label) = match cell.and_then(|c| c.metrics.as_ref()) {
                Some(m) => (color(m.lss), fmt_metric(m.lss)),
                None => ("#bdbdbd".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(
                svg,
                r##"<g class="cell" data-law="{}" data-identity-type="{}"><rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="#ffffff"/><text x="{}" y="{}" {FONT} text-anchor="middle" fill="#000000">{label}</text></g>"##,
                esc(law),
                esc(t),
                x + cw / 2.0,
                y + ch * 0.65,
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

struct Frame {
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    const DEFAULT: Frame = Frame {
        left: 60.0,
        top: 40.0,
        w: 520.0,
        h: 300.0,
    };

    fn y(&self, v: f64) -> f64 {
        self.top + self.h * (1.0 - v.clamp(0.0, 1.0))
    }

    fn open(&self, title: &str, x_label: &str) -> String {
        let width = self.left + self.w + 140.0;
        let height = self.top + self.h + 60.0;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        );
        let _ = writeln!(svg, r#"<text x="{}" y="20" {FONT} font-weight="bold">{}</text>"#, self.left, esc(title));
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444444"/>"##,
            self.left, self.top, self.w, self.h
        );
        // axis ticks are layout, not data
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let y = self.y(tick);
            let _ = writeln!(
                svg,
                r#"<text class="tick" x="{}" y="{}" {FONT} text-anchor="end">{tick}</text>"#,
                self.left - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" {FONT} text-anchor="middle">{}</text>"#,
            self.left + self.w / 2.0,
            self.top + self.h + 40.0,
            esc(x_label)
        );
        svg
    }
}

fn polyline(svg: &mut String, points: &[(f64, f64)], stroke: &str, dashed: bool) {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"{dash}/>"#,
        pts.join(" ")
    );
}

/// LSS against β on a logarithmic β axis, with RFS and F1 as reference lines.
pub fn sweep_svg(rfs: f64, f1: f64, sweep: &[(f64, f64)]) -> String {
    let fr = Frame::DEFAULT;
    let mut svg = fr.open("LSS as a function of beta", "beta (log scale)");
    let (lo, hi) = sweep
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (b, _)| (lo.min(b.ln()), hi.max(b.ln())));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x = |b: f64| fr.left + fr.w * (b.ln() - lo) / span;
    for (name, value, stroke) in [("RFS", rfs, "#1f77b4"), ("F1", f1, "#ff7f0e")] {
        let y = fr.y(value);
        polyline(&mut svg, &[(fr.left, y), (fr.left + fr.w, y)], stroke, true);
        let _ = writeln!(
            svg,
            r#"<text class="ref" x="{}" y="{}" {FONT} fill="{stroke}">{name} {}</text>"#,
            fr.left + fr.w + 6.0,
            y + 4.0,
            fmt_metric(value)
        );
    }
    let pts: Vec<(f64, f64)> = sweep.iter().map(|&(b, l)| (x(b), fr.y(l))).collect();
    polyline(&mut svg, &pts, "#2ca02c", false);
    for (&(b, l), (px, py)) in sweep.iter().zip(&pts) {
        let _ = writeln!(
            svg,
            r##"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="#2ca02c"><title>beta {} lss {}</title></circle>"##,
            fmt_metric(b),
            fmt_metric(l)
        );
    }
    if let (Some(first), Some(last)) = (sweep.first(), sweep.last()) {
        for b in [first.0, last.0] {
            let _ = writeln!(
                svg,
                r#"<text class="tick" x="{:.2}" y="{}" {FONT} text-anchor="middle">{}</text>"#,
                x(b),
                fr.top + fr.h + 16.0,
                fmt_metric(b)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// RFS, F1 and LSS per checkpoint, in series order.
pub fn trend_svg(series: &TrendSeries) -> String {
    let fr = Frame::DEFAULT;
    let mut svg = fr.open("Metrics across checkpoints", "checkpoint");
    let n = series.rows.len();
    let x = |i: usize| {
        if n <= 1 {
            fr.left + fr.w / 2.0
        } else {
            fr.left + fr.w * i as f64 / (n - 1) as f64
        }
    };
    for (i, row) in series.rows.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" {FONT} text-anchor="middle">{}</text>"#,
            x(i),
            fr.top + fr.h + 16.0,
            esc(&row.checkpoint)
        );
    }
    let metrics: [(&str, &str, fn(&crate::metrics::MetricsSummary) -> f64); 3] = [
        ("rfs", "#1f77b4", |m| m.rfs),
        ("f1", "#ff7f0e", |m| m.f1),
        ("lss", "#2ca02c", |m| m.lss),
    ];
    for (k, (name, stroke, get)) in metrics.iter().enumerate() {
        let pts: Vec<(f64, f64)> = series.rows.iter().enumerate().map(|(i, r)| (x(i), fr.y(get(&r.metrics)))).collect();
        polyline(&mut svg, &pts, stroke, false);
        for (row, (px, py)) in series.rows.iter().zip(&pts) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{stroke}"><title>{} {name} {}</title></circle>"#,
                esc(&row.checkpoint),
                fmt_metric(get(&row.metrics))
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" {FONT} fill="{stroke}">{}</text>"#,
            fr.left + fr.w + 10.0,
            fr.top + 16.0 * (k as f64 + 1.0),
            name.to_uppercase()
        );
    }
    svg.push_str("</svg>\n");
    svg
}
