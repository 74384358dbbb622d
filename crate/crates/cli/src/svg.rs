//! Minimal static SVG line charts: fans with shaded quantile bands and
//! small-multiple grids. Output is plain text with fixed-precision
//! coordinates, so repeated runs are byte-identical.

use std::fmt::Write as _;

const FAN_FILL: &str = "#c9c9c9";
const LINE_COLORS: [&str; 6] = ["#1f2d7a", "#b02a2a", "#2a7a2a", "#8a5a00", "#5a2a7a", "#2a6a7a"];

pub struct Panel {
    pub title: String,
    /// Optional shaded band (lower, upper), same length as the series.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
    /// Labelled line series drawn on top.
    pub lines: Vec<(String, Vec<f64>)>,
    /// X-axis labels, rendered at the first and last position.
    pub x_labels: Vec<String>,
}

/// Lays panels out in a grid of `columns` and renders one SVG document.
pub fn small_multiples(title: &str, panels: &[Panel], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns);
    let panel_w = 300.0;
    let panel_h = 200.0;
    let margin = 40.0;
    let width = columns as f64 * panel_w + 2.0 * margin;
    let height = rows as f64 * panel_h + 2.0 * margin + 20.0;

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="100%" height="100%" fill="white"/><text x="{:.1}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (i, panel) in panels.iter().enumerate() {
        let col = i % columns;
        let row = i / columns;
        let x0 = margin + col as f64 * panel_w;
        let y0 = margin + 20.0 + row as f64 * panel_h;
        draw_panel(&mut svg, panel, x0, y0, panel_w - 30.0, panel_h - 45.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// One full-width chart.
pub fn chart(title: &str, panel: &Panel) -> String {
    let width = 760.0;
    let height = 420.0;
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = write!(
        svg,
        r#"<rect width="100%" height="100%" fill="white"/><text x="{:.1}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    draw_panel(&mut svg, panel, 50.0, 40.0, width - 90.0, height - 90.0);
    svg.push_str("</svg>\n");
    svg
}

fn draw_panel(svg: &mut String, panel: &Panel, x0: f64, y0: f64, w: f64, h: f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut n = 0usize;
    if let Some((lower, upper)) = &panel.band {
        n = n.max(lower.len());
        for v in lower.iter().chain(upper) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    for (_, series) in &panel.lines {
        n = n.max(series.len());
        for v in series {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if n < 2 || !lo.is_finite() || !hi.is_finite() {
        return;
    }
    if hi - lo < 1e-12 {
        hi += 0.5;
        lo -= 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let sx = move |i: usize| x0 + w * i as f64 / (n - 1) as f64;
    let sy = move |v: f64| y0 + h * (1.0 - (v - lo) / (hi - lo));

    // Frame, zero line, y-range labels.
    let _ = write!(
        svg,
        r#"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#888" stroke-width="0.5"/>"#
    );
    if lo < 0.0 && hi > 0.0 {
        let zy = sy(0.0);
        let _ = write!(
            svg,
            r#"<line x1="{x0:.1}" y1="{zy:.1}" x2="{:.1}" y2="{zy:.1}" stroke="#bbb" stroke-width="0.5" stroke-dasharray="3,3"/>"#,
            x0 + w
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="9" text-anchor="end">{:.3}</text>"#,
        x0 - 3.0,
        y0 + 8.0,
        hi
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="9" text-anchor="end">{:.3}</text>"#,
        x0 - 3.0,
        y0 + h,
        lo
    );
    if let (Some(first), Some(last)) = (panel.x_labels.first(), panel.x_labels.last()) {
        let _ = write!(
            svg,
            r#"<text x="{x0:.1}" y="{:.1}" font-family="sans-serif" font-size="9">{}</text><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="9" text-anchor="end">{}</text>"#,
            y0 + h + 12.0,
            escape(first),
            x0 + w,
            y0 + h + 12.0,
            escape(last)
        );
    }

    if let Some((lower, upper)) = &panel.band {
        let mut points = String::new();
        for (i, v) in lower.iter().enumerate() {
            let _ = write!(points, "{:.2},{:.2} ", sx(i), sy(*v));
        }
        for (i, v) in upper.iter().enumerate().rev() {
            let _ = write!(points, "{:.2},{:.2} ", sx(i), sy(*v));
        }
        let _ = write!(
            svg,
            r#"<polygon points="{}" fill="{FAN_FILL}" fill-opacity="0.7" stroke="none"/>"#,
            points.trim_end()
        );
    }
    for (idx, (label, series)) in panel.lines.iter().enumerate() {
        let color = LINE_COLORS[idx % LINE_COLORS.len()];
        let mut points = String::new();
        for (i, v) in series.iter().enumerate() {
            let _ = write!(points, "{:.2},{:.2} ", sx(i), sy(*v));
        }
        let _ = write!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            points.trim_end()
        );
        if !label.is_empty() {
            let _ = write!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="9" fill="{color}">{}</text>"#,
                x0 + 4.0,
                y0 + 10.0 + 10.0 * idx as f64,
                escape(label)
            );
        }
    }
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
        x0 + w / 2.0,
        y0 - 5.0,
        escape(&panel.title)
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
