//! Minimal static SVG plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;

fn frame(title: &str, body: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} L{PAD},{} L{},{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_labels(s: &mut String, x0: f64, x1: f64, y0: f64, y1: f64) {
    for (v, x) in [(x0, PAD), (x1, W - PAD)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="10">{v:.4}</text>"#, H - PAD + 14.0);
    }
    for (v, y) in [(y0, H - PAD), (y1, PAD)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.3}</text>"#, PAD - 4.0);
    }
}

/// Bar chart of `counts` over `edges` (one more edge than counts).
pub fn histogram(title: &str, x_label: &str, edges: &[f64], counts: &[usize]) -> String {
    let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let (x0, x1) = (edges[0], edges[edges.len() - 1]);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |c: f64| H - PAD - c / max * (H - 2.0 * PAD);
    let mut body = String::new();
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (a, b) = (sx(edges[k]), sx(edges[k + 1]));
        let _ = writeln!(
            body,
            r##"<rect x="{a:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a78b5" stroke="white"/>"##,
            sy(c as f64),
            b - a,
            H - PAD - sy(c as f64)
        );
    }
    tick_labels(&mut body, x0, x1, 0.0, max);
    frame(title, &body, x_label, "count")
}

/// Scatter of `(x, y)` points with an optional smooth curve.
pub fn curve(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], fit: Option<&dyn Fn(f64) -> f64>) -> String {
    let xs = points.iter().map(|p| p.0);
    let ys = points.iter().map(|p| p.1);
    let x0 = xs.clone().fold(f64::INFINITY, f64::min);
    let mut x1 = xs.fold(f64::NEG_INFINITY, f64::max);
    let y0 = ys.clone().fold(f64::INFINITY, f64::min).min(0.0);
    let mut y1 = ys.fold(f64::NEG_INFINITY, f64::max);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += 0.05 * (y1 - y0);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut body = String::new();
    if let Some(f) = fit {
        let mut d = String::new();
        for k in 0..=200 {
            let x = x0 + (x1 - x0) * k as f64 / 200.0;
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, sx(x), sy(f(x)));
        }
        let _ = writeln!(body, r##"<path d="{d}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##);
    }
    for &(x, y) in points {
        let _ = writeln!(body, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#2c3e50"/>"##, sx(x), sy(y));
    }
    tick_labels(&mut body, x0, x1, y0, y1);
    frame(title, &body, x_label, y_label)
}
