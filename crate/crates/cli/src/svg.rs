//! Figure rendering.
//!
//! Convenience views of the CSV emissions, never the canonical output.
//! Axes are fixed per figure kind so images from different runs compare
//! directly: overlap histograms span [-1, 1], triangle-gap scatters [0, 1].

use glassflow_core::analytics::OverlapHistogram;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 62.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 42.0;
const BOTTOM: f64 = 52.0;

fn plot_width() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_height() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n",
            "<text x=\"{tx}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" ",
            "text-anchor=\"middle\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = LEFT + plot_width() / 2.0,
        title = title,
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    let x0 = LEFT;
    let x1 = LEFT + plot_width();
    let y0 = TOP + plot_height();
    format!(
        concat!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#333333\"/>\n",
            "<line x1=\"{x0}\" y1=\"{top}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"#333333\"/>\n",
            "<text x=\"{xm}\" y=\"{xl}\" font-family=\"sans-serif\" font-size=\"13\" ",
            "text-anchor=\"middle\">{x_label}</text>\n",
            "<text x=\"16\" y=\"{ym}\" font-family=\"sans-serif\" font-size=\"13\" ",
            "text-anchor=\"middle\" transform=\"rotate(-90 16 {ym})\">{y_label}</text>\n"
        ),
        x0 = x0,
        x1 = x1,
        y0 = y0,
        top = TOP,
        xm = LEFT + plot_width() / 2.0,
        xl = HEIGHT - 12.0,
        ym = TOP + plot_height() / 2.0,
        x_label = x_label,
        y_label = y_label,
    )
}

fn x_tick(out: &mut String, value: f64, x_min: f64, x_max: f64, label: &str) {
    let x = LEFT + (value - x_min) / (x_max - x_min) * plot_width();
    let y0 = TOP + plot_height();
    out.push_str(&format!(
        concat!(
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"#333333\"/>\n",
            "<text x=\"{x}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" ",
            "text-anchor=\"middle\">{label}</text>\n"
        ),
        x = x,
        y0 = y0,
        y1 = y0 + 5.0,
        ty = y0 + 18.0,
        label = label,
    ));
}

fn y_tick(out: &mut String, fraction: f64, label: &str) {
    let y = TOP + plot_height() * (1.0 - fraction);
    out.push_str(&format!(
        concat!(
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"#333333\"/>\n",
            "<text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"11\" ",
            "text-anchor=\"end\">{label}</text>\n"
        ),
        x0 = LEFT - 5.0,
        x1 = LEFT,
        y = y,
        tx = LEFT - 8.0,
        ty = y + 4.0,
        label = label,
    ));
}

/// Renders an overlap histogram as a density bar chart over [-1, 1].
pub fn histogram_svg(hist: &OverlapHistogram, title: &str) -> String {
    let total: u64 = hist.counts.iter().sum();
    let densities: Vec<f64> = (0..hist.n_bins())
        .map(|k| {
            let width = hist.bin_edges[k + 1] - hist.bin_edges[k];
            if total == 0 || width <= 0.0 {
                0.0
            } else {
                hist.counts[k] as f64 / (total as f64 * width)
            }
        })
        .collect();
    let y_max = densities.iter().cloned().fold(0.0_f64, f64::max).max(1e-12);

    let mut out = header(title);
    for k in 0..hist.n_bins() {
        let left = hist.bin_edges[k].max(-1.0);
        let right = hist.bin_edges[k + 1].min(1.0);
        let x = LEFT + (left + 1.0) / 2.0 * plot_width();
        let w = (right - left) / 2.0 * plot_width();
        let h = densities[k] / y_max * plot_height();
        if h <= 0.0 {
            continue;
        }
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"#4878a8\"/>\n",
            x = x,
            y = TOP + plot_height() - h,
            w = w,
            h = h,
        ));
    }
    out.push_str(&axes("overlap q", "density"));
    for v in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        x_tick(&mut out, v, -1.0, 1.0, &format!("{v:.1}"));
    }
    y_tick(&mut out, 0.0, "0");
    y_tick(&mut out, 0.5, &format!("{:.3}", y_max / 2.0));
    y_tick(&mut out, 1.0, &format!("{:.3}", y_max));
    out.push_str("</svg>\n");
    out
}

/// Points drawn before the renderer stops adding circles; the CSV keeps
/// every point.
const MAX_SCATTER_POINTS: usize = 5000;

/// Renders triangle side gaps: the short-pair gap on x, the long-pair gap
/// on y. Ultrametric samples hug the x axis; equilateral ones the origin.
pub fn scatter_svg(points: &[(f64, f64)], tolerance: f64, title: &str) -> String {
    let mut out = header(title);
    let clip = |v: f64| v.clamp(0.0, 1.0);
    let tol_y = TOP + plot_height() * (1.0 - clip(tolerance));
    let tol_x = LEFT + clip(tolerance) * plot_width();
    out.push_str(&format!(
        concat!(
            "<line x1=\"{x0}\" y1=\"{ty}\" x2=\"{x1}\" y2=\"{ty}\" ",
            "stroke=\"#b05050\" stroke-dasharray=\"4 3\"/>\n",
            "<line x1=\"{tx}\" y1=\"{top}\" x2=\"{tx}\" y2=\"{yb}\" ",
            "stroke=\"#b05050\" stroke-dasharray=\"4 3\"/>\n"
        ),
        x0 = LEFT,
        x1 = LEFT + plot_width(),
        ty = tol_y,
        tx = tol_x,
        top = TOP,
        yb = TOP + plot_height(),
    ));
    for &(long_gap, short_gap) in points.iter().take(MAX_SCATTER_POINTS) {
        let x = LEFT + clip(short_gap) * plot_width();
        let y = TOP + plot_height() * (1.0 - clip(long_gap));
        out.push_str(&format!(
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"1.6\" fill=\"#4878a8\" fill-opacity=\"0.45\"/>\n",
        ));
    }
    out.push_str(&axes("d_mid - d_min", "d_max - d_mid"));
    for v in [0.0, 0.25, 0.5, 0.75, 1.0] {
        x_tick(&mut out, v, 0.0, 1.0, &format!("{v:.2}"));
    }
    y_tick(&mut out, 0.0, "0.00");
    y_tick(&mut out, 0.25, "0.25");
    y_tick(&mut out, 0.5, "0.50");
    y_tick(&mut out, 0.75, "0.75");
    y_tick(&mut out, 1.0, "1.00");
    out.push_str("</svg>\n");
    out
}
