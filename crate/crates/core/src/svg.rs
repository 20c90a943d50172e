//! Static SVG charts: cost against iteration and grouped gap bars.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn axes(out: &mut String, x_label: &str, y_label: &str, y: (f64, f64)) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = y.0 + (y.1 - y.0) * i as f64 / 4.0;
        let py = y0 - (y0 - y1) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, py + 4.0, tick(v));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 15.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let x = LEFT + 10.0 + 150.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{color}"/>"#, TOP - 2.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 16.0, TOP + 8.0, escape(name));
    }
}

/// Polyline chart; non-finite points are skipped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite = || series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let xr = range(finite().map(|p| p.0));
    let yr = range(finite().map(|p| p.1));
    let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (H - TOP - BOTTOM);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, x_label, y_label, yr);
    let _ = writeln!(out, r#"<text x="{LEFT}" y="{}" text-anchor="middle">{}</text>"#, H - BOTTOM + 16.0, tick(xr.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W - RIGHT, H - BOTTOM + 16.0, tick(xr.1));
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Grouped bars: one group per label, one bar per series name.
pub fn bar_chart(title: &str, y_label: &str, names: &[&str], groups: &[(String, Vec<f64>)]) -> String {
    let yr = range(groups.iter().flat_map(|g| g.1.iter().copied()).filter(|v| v.is_finite()).chain([0.0]));
    let sy = |y: f64| H - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (H - TOP - BOTTOM);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "instance", y_label, yr);
    let slot = (W - LEFT - RIGHT) / groups.len().max(1) as f64;
    let bar = slot * 0.8 / names.len().max(1) as f64;
    for (gi, (label, values)) in groups.iter().enumerate() {
        let gx = LEFT + slot * gi as f64 + slot * 0.1;
        for (bi, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let (a, b) = (sy(v.max(0.0)), sy(v.min(0.0)));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{a:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                gx + bar * bi as f64,
                bar,
                (b - a).max(0.5),
                PALETTE[bi % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            gx + slot * 0.4,
            H - BOTTOM + 14.0,
            escape(label)
        );
    }
    legend(&mut out, names);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_skips_infinite_points() {
        let s = Series { name: "a<b".into(), points: vec![(0.0, f64::INFINITY), (1.0, 5.0), (2.0, 4.0)] };
        let svg = line_chart("t", "x", "y", &[s]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("inf"));
    }

    #[test]
    fn bar_chart_draws_one_rect_per_value() {
        let groups = vec![("I1".to_string(), vec![0.5, 1.0]), ("I2".to_string(), vec![0.0, 2.0])];
        let svg = bar_chart("gaps", "%", &["hybrid", "plain"], &groups);
        // background + 4 bars + 2 legend swatches
        assert_eq!(svg.matches("<rect").count(), 7);
    }
}
