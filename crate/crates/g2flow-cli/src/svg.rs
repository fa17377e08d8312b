//! Minimal SVG line plots: stacked panels, one polyline per panel, plain
//! axes with five ticks each. No external assets, deterministic output.

use crate::fmt;

/// One stacked panel: a title and the curve to draw.
pub struct Panel<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub points: &'a [(f64, f64)],
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 46.0;
const TICKS: usize = 5;

/// Render the panels into a complete standalone SVG document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
         viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"12\">\n",
        WIDTH, height, WIDTH, height
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, panel) in panels.iter().enumerate() {
        draw_panel(&mut out, panel, i as f64 * PANEL_HEIGHT);
    }
    out.push_str("</svg>\n");
    out
}

fn draw_panel(out: &mut String, panel: &Panel, y_off: f64) {
    let finite: Vec<(f64, f64)> = panel
        .points
        .iter()
        .copied()
        .filter(|&(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (x_lo, x_hi) = padded_range(finite.iter().map(|p| p.0));
    let (y_lo, y_hi) = padded_range(finite.iter().map(|p| p.1));

    let plot_left = MARGIN_LEFT;
    let plot_right = WIDTH - MARGIN_RIGHT;
    let plot_top = y_off + MARGIN_TOP;
    let plot_bottom = y_off + PANEL_HEIGHT - MARGIN_BOTTOM;
    let sx = |x: f64| plot_left + (x - x_lo) / (x_hi - x_lo) * (plot_right - plot_left);
    let sy = |y: f64| plot_bottom - (y - y_lo) / (y_hi - y_lo) * (plot_bottom - plot_top);

    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\">{}</text>\n",
        fmt::pixel(plot_left),
        fmt::pixel(y_off + 20.0),
        escape(panel.title)
    ));
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        fmt::pixel(plot_left),
        fmt::pixel(plot_top),
        fmt::pixel(plot_right - plot_left),
        fmt::pixel(plot_bottom - plot_top)
    ));
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let xp = sx(xv);
        let yp = sy(yv);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"#444\"/>\n",
            x = fmt::pixel(xp),
            b = fmt::pixel(plot_bottom),
            b2 = fmt::pixel(plot_bottom + 5.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt::pixel(xp),
            fmt::pixel(plot_bottom + 18.0),
            tick_label(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{l2}\" y1=\"{y}\" x2=\"{l}\" y2=\"{y}\" stroke=\"#444\"/>\n",
            l = fmt::pixel(plot_left),
            l2 = fmt::pixel(plot_left - 5.0),
            y = fmt::pixel(yp)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt::pixel(plot_left - 8.0),
            fmt::pixel(yp + 4.0),
            tick_label(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt::pixel((plot_left + plot_right) / 2.0),
        fmt::pixel(plot_bottom + 36.0),
        escape(panel.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" transform=\"rotate(-90 {x} {y})\">{t}</text>\n",
        x = fmt::pixel(plot_left - 58.0),
        y = fmt::pixel((plot_top + plot_bottom) / 2.0),
        t = escape(panel.y_label)
    ));
    for run in panel
        .points
        .split(|&(x, y)| !(x.is_finite() && y.is_finite()))
    {
        if run.len() < 2 {
            continue;
        }
        let pts: Vec<String> = run
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt::pixel(sx(x)), fmt::pixel(sy(y))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 {
        0.05 * span
    } else {
        0.5 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        fmt::float((v * 1e3).round() / 1e3)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
