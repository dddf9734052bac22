//! Minimal SVG writer: line charts and heat maps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
"#,
        WIDTH / 2.0,
        escape(title),
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label),
    );
}

fn axes(out: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{left},{top} V{bottom} H{right}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let x = left + t * (right - left);
        let y = bottom - t * (bottom - top);
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="middle">{:.3}</text><text x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
            bottom + 16.0,
            x0 + t * (x1 - x0),
            left - 6.0,
            y + 4.0,
            y0 + t * (y1 - y0),
        );
    }
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    let xr = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    axes(&mut out, xr, yr);
    let sx = |x: f64| MARGIN + (x - xr.0) / (xr.1 - xr.0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - yr.0) / (yr.1 - yr.0) * (HEIGHT - 2.0 * MARGIN);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 16.0 * k as f64,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Diverging blue-white-red colour for `v` scaled by `max_abs`.
fn diverging(v: f64, max_abs: f64) -> String {
    let t = (v / max_abs).clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 * (1.0 - t.abs()) + c * t.abs()).round() as u8;
    if t >= 0.0 {
        format!("#{:02x}{:02x}{:02x}", fade(214.0), fade(39.0), fade(40.0))
    } else {
        format!("#{:02x}{:02x}{:02x}", fade(31.0), fade(119.0), fade(180.0))
    }
}

/// Heat map of `values[i][j]` at `(grid[i], grid[j])` on the x and y axes.
pub fn heat_map(title: &str, x_label: &str, y_label: &str, grid: &[f64], values: &[Vec<f64>]) -> String {
    let mut out = String::new();
    header(&mut out, title, x_label, y_label);
    let range = extent(grid.iter().copied());
    axes(&mut out, range, range);
    let max_abs = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let n = grid.len() as f64;
    let cw = (WIDTH - 2.0 * MARGIN) / n;
    let ch = (HEIGHT - 2.0 * MARGIN) / n;
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN + i as f64 * cw,
                HEIGHT - MARGIN - (j as f64 + 1.0) * ch,
                cw + 0.3,
                ch + 0.3,
                diverging(v, max_abs)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
