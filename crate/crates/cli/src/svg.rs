//! Minimal static SVG rendering of sweep results: one log-log polyline per
//! estimator plus decade ticks and a legend. No external plotting
//! dependency; output is a deterministic function of the rows.

use std::collections::BTreeMap;

use sf_core::harness::{RiskRow, SweepAxis};

use crate::CliError;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 64.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::P => "p",
        SweepAxis::N => "n",
        SweepAxis::S => "s",
    }
}

fn axis_value(row: &RiskRow, axis: SweepAxis) -> usize {
    match axis {
        SweepAxis::P => row.p,
        SweepAxis::N => row.n,
        SweepAxis::S => row.s,
    }
}

pub fn render_loglog(rows: &[RiskRow], axis: SweepAxis) -> Result<String, CliError> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        let x = axis_value(row, axis) as f64;
        let y = row.report.mean_sq_error;
        if x <= 0.0 || y <= 0.0 {
            return Err(CliError::validation(format!(
                "log-log plot needs positive axis values and MSEs, got ({x}, {y})"
            )));
        }
        series
            .entry(row.report.estimator_id.clone())
            .or_default()
            .push((x.log10(), y.log10()));
    }
    if series.is_empty() {
        return Err(CliError::validation("no rows to plot"));
    }
    for points in series.values_mut() {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    }

    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let (mut x_lo, mut x_hi) = min_max(all.iter().map(|p| p.0));
    let (mut y_lo, mut y_hi) = min_max(all.iter().map(|p| p.1));
    pad_range(&mut x_lo, &mut x_hi);
    pad_range(&mut y_lo, &mut y_hi);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |lx: f64| MARGIN_LEFT + (lx - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |ly: f64| MARGIN_TOP + (y_hi - ly) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // Frame.
    out.push_str(&format!(
        "  <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        MARGIN_LEFT, MARGIN_TOP
    ));

    // Decade ticks.
    for k in (x_lo.ceil() as i64)..=(x_hi.floor() as i64) {
        let x = sx(k as f64);
        out.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#cccccc\"/>\n",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        ));
        out.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1e{k}</text>\n",
            MARGIN_TOP + plot_h + 18.0
        ));
    }
    for k in (y_lo.ceil() as i64)..=(y_hi.floor() as i64) {
        let y = sy(k as f64);
        out.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#cccccc\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        ));
        out.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{k}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0
        ));
    }

    // Axis labels.
    out.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 18.0,
        axis_name(axis)
    ));
    out.push_str(&format!(
        "  <text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">\
         mean squared error</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    // Curves and legend.
    for (idx, (id, points)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|(lx, ly)| format!("{:.2},{:.2}", sx(*lx), sy(*ly)))
            .collect();
        out.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        for (lx, ly) in points {
            out.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                sx(*lx),
                sy(*ly)
            ));
        }
        let legend_y = MARGIN_TOP + 14.0 + idx as f64 * 18.0;
        let legend_x = MARGIN_LEFT + plot_w + 14.0;
        out.push_str(&format!(
            "  <line x1=\"{legend_x:.2}\" y1=\"{legend_y:.2}\" x2=\"{:.2}\" y2=\"{legend_y:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n",
            legend_x + 22.0
        ));
        out.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\">{id}</text>\n",
            legend_x + 28.0,
            legend_y + 4.0
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn pad_range(lo: &mut f64, hi: &mut f64) {
    if (*hi - *lo).abs() < 1e-12 {
        *lo -= 0.5;
        *hi += 0.5;
    } else {
        let pad = (*hi - *lo) * 0.06;
        *lo -= pad;
        *hi += pad;
    }
}
