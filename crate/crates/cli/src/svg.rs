//! Self-contained SVG emission for DET plots: log-log axes, solid DET
//! curves, dashed divergence bounds, and the gray dashed chance line
//! `beta = 1 - alpha`.

use std::fmt::Write as _;

use spoofsim_core::detect::DetCurve;
use spoofsim_core::detect::log_alpha_grid;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 64.0;
const RATE_FLOOR: f64 = 1e-4;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn x_of(alpha: f64) -> f64 {
    let t = (alpha.max(RATE_FLOOR).log10() + 4.0) / 4.0;
    MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn y_of(beta: f64) -> f64 {
    let t = (beta.max(RATE_FLOOR).log10() + 4.0) / 4.0;
    HEIGHT - MARGIN_BOTTOM - t * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

fn polyline(points: &[(f64, f64)], style: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|&(a, b)| format!("{:.2},{:.2}", x_of(a), y_of(b)))
        .collect();
    format!("  <polyline points=\"{}\" style=\"{style}\"/>\n", coords.join(" "))
}

/// Reduce a full threshold sweep to at most `limit` plot points chosen at
/// log-spaced false-alarm quantiles.
fn plot_points(curve: &DetCurve, limit: usize) -> Vec<(f64, f64)> {
    let lo = (0.5 / curve.trials as f64).max(RATE_FLOOR);
    let targets = log_alpha_grid(lo, 1.0, limit);
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(limit);
    for t in targets {
        if let Some(p) = curve.point_nearest_alpha(t) {
            let pt = (p.alpha, p.beta);
            if pts.last() != Some(&pt) {
                pts.push(pt);
            }
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite rates"));
    pts.dedup();
    pts
}

/// Render labelled DET curves with their bounds into an SVG document.
pub fn det_plot(curves: &[(String, &DetCurve)], title: &str) -> String {
    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    )
    .unwrap();
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{title}</text>",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0
    )
    .unwrap();

    // Decade grid and tick labels.
    for exp in -4..=0 {
        let v = 10f64.powi(exp);
        let x = x_of(v);
        let y = y_of(v);
        writeln!(
            svg,
            "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_TOP,
            HEIGHT - MARGIN_BOTTOM
        )
        .unwrap();
        writeln!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">1e{exp}</text>",
            HEIGHT - MARGIN_BOTTOM + 18.0
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">1e{exp}</text>",
            MARGIN_LEFT - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        "  <rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#444444\"/>",
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    )
    .unwrap();
    writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">false alarm probability  alpha</text>",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 16.0
    )
    .unwrap();
    writeln!(
        svg,
        "  <text x=\"20\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">missed detection probability  beta</text>",
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0
    )
    .unwrap();

    // Chance line beta = 1 - alpha.
    let chance: Vec<(f64, f64)> = log_alpha_grid(RATE_FLOOR, 1.0 - RATE_FLOOR, 160)
        .into_iter()
        .map(|a| (a, 1.0 - a))
        .collect();
    svg.push_str(&polyline(
        &chance,
        "fill:none;stroke:#999999;stroke-width:1.2;stroke-dasharray:6 4",
    ));

    for (idx, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let bound: Vec<(f64, f64)> = curve
            .bound
            .iter()
            .copied()
            .filter(|&(_, b)| b > 0.0)
            .collect();
        if bound.len() > 1 {
            svg.push_str(&polyline(
                &bound,
                &format!("fill:none;stroke:{color};stroke-width:1.2;stroke-dasharray:5 4"),
            ));
        }
        let pts = plot_points(curve, 200);
        if pts.len() > 1 {
            svg.push_str(&polyline(
                &pts,
                &format!("fill:none;stroke:{color};stroke-width:1.8"),
            ));
        }
        writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{label} (D = {:.4})</text>",
            MARGIN_LEFT + 12.0,
            MARGIN_TOP + 18.0 + 16.0 * idx as f64,
            curve.d_forward
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
