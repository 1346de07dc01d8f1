//! Forest and trace plots as plain SVG text.

use std::fmt::Write;

use dtameta::model::ModelKind;
use dtameta::summary::{FitSummary, Interval};

use crate::bundle::DrawTable;
use crate::error::CliError;

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 720.0;

const OBSERVED: &str = "#c2185b";
const FITTED: &str = "#1f5fa8";
const CHAIN_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

struct Panel {
    name: &'static str,
    x0: f64,
    width: f64,
}

impl Panel {
    fn x(&self, p: f64) -> f64 {
        self.x0 + p.clamp(0.0, 1.0) * self.width
    }
}

/// One interval marker with the values it encodes attached as attributes.
#[allow(clippy::too_many_arguments)]
fn marker(
    svg: &mut String,
    panel: &Panel,
    class: &str,
    study: &str,
    y: f64,
    iv: &Interval,
    color: &str,
    diamond: bool,
) {
    let (lo, hi, est) = (panel.x(iv.low), panel.x(iv.high), panel.x(iv.estimate));
    let _ = writeln!(
        svg,
        "<g class=\"{class}\" data-panel=\"{}\" data-study=\"{}\" data-estimate=\"{:.6}\" data-low=\"{:.6}\" data-high=\"{:.6}\">",
        panel.name,
        escape(study),
        iv.estimate,
        iv.low,
        iv.high
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{lo:.2}\" y1=\"{y:.2}\" x2=\"{hi:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
    );
    if diamond {
        let _ = writeln!(
            svg,
            "<path d=\"M{:.2},{y:.2} L{est:.2},{:.2} L{:.2},{y:.2} L{est:.2},{:.2} Z\" fill=\"{color}\"/>",
            est - 6.0,
            y - 5.0,
            est + 6.0,
            y + 5.0
        );
    } else {
        let _ = writeln!(
            svg,
            "<circle cx=\"{est:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"{color}\"/>"
        );
    }
    svg.push_str("</g>\n");
}

/// Pooled estimates per cell for the sensitivity and specificity panels.
fn pooled(summary: &FitSummary) -> Vec<(String, Interval, Interval)> {
    let (se, sp) = match summary.model {
        ModelKind::Copula(_) => ("sens", "spec"),
        ModelKind::Brma => ("MU_se", "MU_sp"),
    };
    let find = |q: &str, cell: &str| {
        summary.parameter(&format!("{q}[{cell}]")).map(|p| Interval {
            estimate: p.mean,
            low: p.q025,
            high: p.q975,
        })
    };
    summary
        .cells
        .iter()
        .filter_map(|cell| {
            let label = if summary.cells.len() == 1 {
                "Pooled".to_string()
            } else {
                format!("Pooled {cell}")
            };
            Some((label, find(se, cell)?, find(sp, cell)?))
        })
        .collect()
}

/// Observed proportions with exact intervals next to the fitted study means,
/// one panel each for sensitivity and specificity, pooled rows last.
pub fn forest(summary: &FitSummary) -> String {
    let label_width = 170.0;
    let gap = 40.0;
    let width = (WIDTH - label_width - 2.0 * gap) / 2.0;
    let panels = [
        Panel {
            name: "sensitivity",
            x0: label_width,
            width,
        },
        Panel {
            name: "specificity",
            x0: label_width + width + gap,
            width,
        },
    ];
    let pooled = pooled(summary);
    let n_rows = summary.studies.len() + pooled.len();
    let (top, bottom) = (70.0, HEIGHT - 60.0);
    let row_h = (bottom - top) / n_rows.max(1) as f64;
    let row_y = |i: usize| top + (i as f64 + 0.5) * row_h;

    let mut svg = header(&format!("{} model, {}", summary.model, summary.formula));
    for panel in &panels {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"52\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            panel.x0 + panel.width / 2.0,
            if panel.name == "sensitivity" {
                "Sensitivity"
            } else {
                "Specificity"
            }
        );
        for k in 0..=5 {
            let p = k as f64 / 5.0;
            let x = panel.x(p);
            let _ = writeln!(
                svg,
                "<line x1=\"{x:.2}\" y1=\"{top:.2}\" x2=\"{x:.2}\" y2=\"{bottom:.2}\" stroke=\"#dddddd\"/>\n\
                 <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{p:.1}</text>",
                bottom + 16.0
            );
        }
    }
    for (i, st) in summary.studies.iter().enumerate() {
        let y = row_y(i);
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            label_width - 12.0,
            y + 4.0,
            escape(&st.study_id)
        );
        for (panel, obs, fit) in [
            (&panels[0], &st.observed_se, &st.fitted_se),
            (&panels[1], &st.observed_sp, &st.fitted_sp),
        ] {
            marker(&mut svg, panel, "observed", &st.study_id, y - 4.0, obs, OBSERVED, false);
            marker(&mut svg, panel, "fitted", &st.study_id, y + 4.0, fit, FITTED, false);
        }
    }
    for (k, (label, se, sp)) in pooled.iter().enumerate() {
        let y = row_y(summary.studies.len() + k);
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-weight=\"bold\">{}</text>",
            label_width - 12.0,
            y + 4.0,
            escape(label)
        );
        marker(&mut svg, &panels[0], "pooled", label, y, se, FITTED, true);
        marker(&mut svg, &panels[1], "pooled", label, y, sp, FITTED, true);
    }
    let _ = writeln!(
        svg,
        "<circle cx=\"24\" cy=\"{:.2}\" r=\"3.5\" fill=\"{OBSERVED}\"/><text x=\"32\" y=\"{:.2}\">observed, 95% exact CI</text>\n\
         <circle cx=\"200\" cy=\"{:.2}\" r=\"3.5\" fill=\"{FITTED}\"/><text x=\"208\" y=\"{:.2}\">posterior mean, 95% credible interval</text>",
        HEIGHT - 18.0,
        HEIGHT - 14.0,
        HEIGHT - 18.0,
        HEIGHT - 14.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Kept-draw series for every headline parameter, one polyline per chain.
pub fn trace(summary: &FitSummary, draws: &DrawTable) -> Result<String, CliError> {
    let params = summary.key_parameters();
    let chains = draws.n_chains();
    let (left, right, top, bottom) = (150.0, WIDTH - 20.0, 44.0, HEIGHT - 30.0);
    let gap = 12.0;
    let panel_h = (bottom - top - gap * (params.len().saturating_sub(1)) as f64) / params.len().max(1) as f64;
    let mut svg = header(&format!("Trace plots, {} model", summary.model));
    for (k, p) in params.iter().enumerate() {
        let col = draws
            .column(&p.name)
            .ok_or_else(|| CliError::Data(format!("draws.csv has no column {}", p.name)))?;
        let series: Vec<Vec<f64>> = (1..=chains).map(|c| draws.series(col, c)).collect();
        let lo = series.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let hi = series.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let y0 = top + k as f64 * (panel_h + gap);
        let _ = writeln!(
            svg,
            "<rect x=\"{left}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{panel_h:.2}\" fill=\"none\" stroke=\"#999999\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#666666\">{hi:.3}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#666666\">{lo:.3}</text>",
            right - left,
            left - 50.0,
            y0 + panel_h / 2.0 + 4.0,
            escape(&p.name),
            left - 4.0,
            y0 + 10.0,
            left - 4.0,
            y0 + panel_h - 2.0
        );
        for (c, s) in series.iter().enumerate() {
            let n = s.len().max(2) as f64 - 1.0;
            let points: Vec<String> = s
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let x = left + (right - left) * i as f64 / n;
                    let y = y0 + panel_h - (v - lo) / span * panel_h;
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                svg,
                "<polyline data-parameter=\"{}\" data-chain=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"0.6\" stroke-opacity=\"0.8\" points=\"{}\"/>",
                escape(&p.name),
                c + 1,
                CHAIN_COLORS[c % CHAIN_COLORS.len()],
                points.join(" ")
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
