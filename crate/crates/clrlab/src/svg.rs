//! Dependency-free SVG line charts of convergence traces.
//!
//! Each panel plots log10 of the relative residual against the iteration
//! index, one polyline per trace, with the theoretical bound (when given)
//! as a dashed overlay at its checkpoints. The output is a single
//! self-contained SVG document with inline styling and no external assets.

use std::path::Path;

use crate::analysis::BoundReport;
use crate::error::Error;
use crate::optimizers::Trace;
use crate::util::atomic_write;
use crate::Result;

/// Residual ratios at or below this value are clamped before taking logs,
/// so exact zeros plot at -16 instead of disappearing.
pub const RESIDUAL_FLOOR: f64 = 1e-16;

/// Longest polyline emitted; denser traces are thinned evenly.
const MAX_POINTS: usize = 2000;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 52.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// (iteration, log10 residual ratio)
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
    /// Annotations rendered in red under the title (e.g. diverged runs).
    pub notes: Vec<String>,
}

fn log_ratio(residual: f64, init: f64) -> f64 {
    let ratio = if init > 0.0 { residual / init } else { 0.0 };
    ratio.max(RESIDUAL_FLOOR).log10()
}

impl Panel {
    /// Builds a panel from traces (legend order = input order) plus an
    /// optional bound overlay.
    pub fn from_traces(title: &str, traces: &[&Trace], bound: Option<&BoundReport>) -> Panel {
        let mut series = Vec::new();
        for trace in traces {
            let init = trace.initial_residual();
            series.push(Series {
                label: trace.meta.optimizer.clone(),
                points: trace
                    .rows()
                    .iter()
                    .map(|row| (row.t as f64, log_ratio(row.residual, init)))
                    .collect(),
                dashed: false,
            });
        }
        if let Some(report) = bound {
            series.push(Series {
                label: format!("{} bound", report.regime),
                points: report
                    .rows
                    .iter()
                    .map(|row| (row.t as f64, row.bound.max(RESIDUAL_FLOOR).log10()))
                    .collect(),
                dashed: true,
            });
        }
        Panel {
            title: title.to_string(),
            series,
            notes: Vec::new(),
        }
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_step(range: f64, target: f64) -> f64 {
    let raw = (range / target).max(1e-12);
    let mag = 10f64.powf(raw.log10().floor());
    for mult in [1.0, 2.0, 5.0, 10.0] {
        if mult * mag >= raw {
            return mult * mag;
        }
    }
    10.0 * mag
}

fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(stride).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

/// Renders one panel's markup into `out`, translated by `(dx, dy)`.
fn render_panel(out: &mut String, panel: &Panel, dx: f64, dy: f64) {
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;

    let mut x_max: f64 = 1.0;
    let mut y_min: f64 = -1.0;
    let mut y_max: f64 = 0.0;
    for s in &panel.series {
        for &(x, y) in &s.points {
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    let y_min = y_min.floor();
    let y_max = y_max.ceil();
    let x_of = |x: f64| MARGIN_L + x / x_max * plot_w;
    let y_of = |y: f64| MARGIN_T + (y_max - y) / (y_max - y_min).max(1e-12) * plot_h;

    out.push_str(&format!("<g transform=\"translate({dx:.2},{dy:.2})\">\n"));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"14\" font-weight=\"bold\">{}</text>\n",
        PANEL_W / 2.0,
        xml_escape(&panel.title)
    ));
    for (i, note) in panel.notes.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\" fill=\"#c00\">{}</text>\n",
            PANEL_W / 2.0,
            MARGIN_T + 14.0 * (i + 1) as f64,
            xml_escape(note)
        ));
    }

    // gridlines and ticks
    let x_step = nice_step(x_max, 5.0);
    let mut x = 0.0;
    while x <= x_max + 0.5 * x_step {
        let px = x_of(x.min(x_max));
        out.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#ddd\" stroke-width=\"1\"/>\n",
            MARGIN_T,
            MARGIN_T + plot_h
        ));
        out.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            MARGIN_T + plot_h + 16.0,
            x as i64
        ));
        x += x_step;
    }
    let y_step = ((y_max - y_min) / 6.0).ceil().max(1.0);
    let mut y = y_max;
    while y >= y_min - 0.5 * y_step {
        let py = y_of(y.max(y_min));
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#ddd\" stroke-width=\"1\"/>\n",
            MARGIN_L,
            MARGIN_L + plot_w
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            MARGIN_L - 6.0,
            py + 4.0,
            y as i64
        ));
        y -= y_step;
    }

    // frame
    out.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" \
         fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n"
    ));
    // axis labels
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">iteration t</text>\n",
        MARGIN_L + plot_w / 2.0,
        PANEL_H - 12.0
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" \
         transform=\"rotate(-90 16 {:.2})\">log10 residual ratio</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));

    // polylines
    let mut color_index = 0;
    for s in &panel.series {
        let color = if s.dashed {
            "#555555"
        } else {
            let c = PALETTE[color_index % PALETTE.len()];
            color_index += 1;
            c
        };
        let dash = if s.dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        let pts: Vec<String> = thin(&s.points)
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", x_of(x), y_of(y)))
            .collect();
        if !pts.is_empty() {
            out.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
                pts.join(" ")
            ));
        }
    }

    // legend, top-right inside the frame, input order
    let legend_x = MARGIN_L + plot_w - 150.0;
    let mut legend_y = MARGIN_T + 16.0;
    let mut color_index = 0;
    for s in &panel.series {
        let color = if s.dashed {
            "#555555"
        } else {
            let c = PALETTE[color_index % PALETTE.len()];
            color_index += 1;
            c
        };
        let dash = if s.dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        out.push_str(&format!(
            "<line x1=\"{legend_x:.2}\" y1=\"{legend_y:.2}\" x2=\"{:.2}\" y2=\"{legend_y:.2}\" \
             stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
            legend_x + 26.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            legend_x + 32.0,
            legend_y + 4.0,
            xml_escape(&s.label)
        ));
        legend_y += 16.0;
    }
    out.push_str("</g>\n");
}

/// Renders panels into a `columns`-wide grid.
pub fn render_grid(panels: &[Panel], columns: usize) -> Result<String> {
    if panels.is_empty() {
        return Err(Error::InvalidArgument("need at least one panel".into()));
    }
    let columns = columns.max(1).min(panels.len());
    let rows = panels.len().div_ceil(columns);
    let width = columns as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    for (i, panel) in panels.iter().enumerate() {
        let dx = (i % columns) as f64 * PANEL_W;
        let dy = (i / columns) as f64 * PANEL_H;
        render_panel(&mut out, panel, dx, dy);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes a single-panel convergence plot; legend entries follow the order
/// of `traces`. Fails on an empty trace list.
pub fn emit_svg(
    title: &str,
    traces: &[&Trace],
    bound: Option<&BoundReport>,
    path: &Path,
) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("need at least one trace".into()));
    }
    let panel = Panel::from_traces(title, traces, bound);
    write_svg(&[panel], 1, path)
}

/// Writes a panel grid (e.g. one panel per condition number).
pub fn write_svg(panels: &[Panel], columns: usize, path: &Path) -> Result<()> {
    let doc = render_grid(panels, columns)?;
    atomic_write(path, &doc).map_err(|e| Error::io(path.display().to_string(), e))
}
