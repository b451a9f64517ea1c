//! Minimal SVG charts: grouped bars and polylines.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn plot_w() -> f64 {
    WIDTH - MARGIN_LEFT - MARGIN_RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn y_axis(out: &mut String, y_min: f64, y_max: f64, label: &str) {
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h();
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, x0 + plot_w());
    for t in 0..=5 {
        let v = y_min + (y_max - y_min) * t as f64 / 5.0;
        let y = y0 - plot_h() * t as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y:.1}" x2="{x0}" y2="{y:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_TOP + plot_h() / 2.0,
        escape(label)
    );
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn legend(out: &mut String, series: &[Series]) {
    let x = WIDTH - MARGIN_RIGHT + 14.0;
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{}" y="{:.1}">{}</text>"#,
            y - 10.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y,
            escape(&s.name)
        );
    }
}

fn bounds(series: &[Series], floor_zero: bool) -> (f64, f64) {
    let vals = series.iter().flat_map(|s| s.values.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if floor_zero {
        lo = lo.min(0.0);
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    (lo, hi)
}

/// One group per category, one bar per series within each group.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (y_min, y_max) = bounds(series, true);
    y_axis(&mut out, y_min, y_max, y_label);
    let y0 = MARGIN_TOP + plot_h();
    let scale = |v: f64| y0 - plot_h() * (v - y_min) / (y_max - y_min);
    let group_w = plot_w() / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (c, cat) in categories.iter().enumerate() {
        let gx = MARGIN_LEFT + group_w * c as f64 + group_w * 0.1;
        for (s, ser) in series.iter().enumerate() {
            let Some(&v) = ser.values.get(c) else { continue };
            if !v.is_finite() {
                continue;
            }
            let top = scale(v.max(y_min)).min(scale(0.0_f64.max(y_min)));
            let h = (scale(0.0_f64.max(y_min)) - scale(v)).abs();
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{top:.1}" width="{:.1}" height="{h:.1}" fill="{}"><title>{}: {v}</title></rect>"#,
                gx + bar_w * s as f64,
                bar_w,
                PALETTE[s % PALETTE.len()],
                escape(&ser.name)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + group_w * (c as f64 + 0.5),
            y0 + 18.0,
            escape(cat)
        );
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// Polylines over shared x positions.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, x: &[f64], series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (y_min, y_max) = bounds(series, false);
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);
    y_axis(&mut out, y_min, y_max, y_label);
    let (x_min, x_max) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let y0 = MARGIN_TOP + plot_h();
    let px = |v: f64| MARGIN_LEFT + plot_w() * (v - x_min) / x_span;
    let py = |v: f64| y0 - plot_h() * (v - y_min) / (y_max - y_min);
    for &v in x {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(v), y0 + 18.0, tick(v));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w() / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    for (s, ser) in series.iter().enumerate() {
        let colour = PALETTE[s % PALETTE.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(&ser.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&a, &b)| format!("{:.1},{:.1}", px(a), py(b)))
            .collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, pts.join(" "));
        for p in &pts {
            let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>"#);
        }
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Vec<Series> {
        vec![
            Series { name: "a<b".into(), values: vec![0.5, 1.0] },
            Series { name: "c".into(), values: vec![0.25, f64::NAN] },
        ]
    }

    #[test]
    fn bar_chart_is_well_formed() {
        let svg = bar_chart("T", "y", &["x1".into(), "x2".into()], &series());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<title>").count(), 3);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn line_chart_is_well_formed() {
        let svg = line_chart("T", "k", "acc", &[2.0, 3.0], &series());
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn ticks_are_trimmed() {
        assert_eq!(tick(0.5), "0.5");
        assert_eq!(tick(1.0), "1");
        assert_eq!(tick(-0.0), "0");
    }
}
