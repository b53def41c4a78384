//! Standalone SVG line plots of one-axis sweeps.
//!
//! Each attack mode is drawn as polylines over runs of consecutive rows.
//! Runs of feasible rows are solid, runs of infeasible rows are dashed, and
//! every row gets a marker. Output depends only on the input rows and style.

use std::fmt::Write as _;

use crate::analytic::AttackMode;
use crate::error::{Error, Result};
use crate::sweep::CurvePoint;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub log_x: bool,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Free-form line under the title, typically the fixed parameters.
    pub annotation: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 800.0,
            height: 520.0,
            log_x: true,
            title: "Sifted bits known to Eve per block".into(),
            x_label: "mu (mean photons per pulse)".into(),
            y_label: "s_partial".into(),
            annotation: String::new(),
        }
    }
}

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 60.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn color(mode: AttackMode) -> &'static str {
    match mode {
        AttackMode::Matched => "#1f77b4",
        AttackMode::ErrorOnly => "#d62728",
    }
}

fn legend_label(mode: AttackMode) -> &'static str {
    match mode {
        AttackMode::Matched => "count rate and error rate matched",
        AttackMode::ErrorOnly => "error rate matched only",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    log_x: bool,
    width: f64,
    height: f64,
}

impl Frame {
    fn x_of(&self, v: f64) -> f64 {
        let (lo, hi, v) =
            if self.log_x { (self.x_min.log10(), self.x_max.log10(), v.log10()) } else { (self.x_min, self.x_max, v) };
        let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        MARGIN_LEFT + t * (self.width - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y_of(&self, v: f64) -> f64 {
        let t = (v - self.y_min) / (self.y_max - self.y_min);
        self.height - MARGIN_BOTTOM - t * (self.height - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

/// Tick positions at multiples of 1, 2 or 5 times a power of ten.
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|f| f * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn decade_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let first = lo.log10().ceil() as i32;
    let last = hi.log10().floor() as i32;
    (first..=last).map(|e| 10f64.powi(e)).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[&CurvePoint], class: &str, stroke: &str, dash: Option<&str>) {
    let coords: Vec<String> =
        pts.iter().map(|p| format!("{:.2},{:.2}", frame.x_of(p.coords[0]), frame.y_of(p.s_partial))).collect();
    let dash = dash.map(|d| format!(" stroke-dasharray=\"{d}\"")).unwrap_or_default();
    let _ = writeln!(
        out,
        "  <polyline class=\"{class}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\"{dash} points=\"{}\"/>",
        coords.join(" ")
    );
}

/// Renders a one-axis sweep. Degenerate rows are left out of the curves.
pub fn render_svg(points: &[CurvePoint], style: &PlotStyle) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Plot("no rows".into()));
    }
    if points.iter().any(|p| p.coords.len() != 1) {
        return Err(Error::Plot("only one-axis sweeps can be drawn; use the CSV for two-axis grids".into()));
    }
    let drawable: Vec<&CurvePoint> = points.iter().filter(|p| !p.degenerate && p.s_partial.is_finite()).collect();
    if drawable.is_empty() {
        return Err(Error::Plot("every row is degenerate".into()));
    }
    if style.log_x && drawable.iter().any(|p| p.coords[0] <= 0.0) {
        return Err(Error::Plot("log x axis needs positive swept values".into()));
    }

    let fold =
        |f: fn(f64, f64) -> f64, init: f64, get: fn(&CurvePoint) -> f64| drawable.iter().map(|p| get(p)).fold(init, f);
    let (mut x_min, mut x_max) =
        (fold(f64::min, f64::INFINITY, |p| p.coords[0]), fold(f64::max, f64::NEG_INFINITY, |p| p.coords[0]));
    let (mut y_min, mut y_max) =
        (fold(f64::min, f64::INFINITY, |p| p.s_partial), fold(f64::max, f64::NEG_INFINITY, |p| p.s_partial));
    if x_min == x_max {
        if style.log_x {
            x_min /= 2.0;
            x_max *= 2.0;
        } else {
            x_min -= 1.0;
            x_max += 1.0;
        }
    }
    if y_min == y_max {
        let pad = if y_min == 0.0 { 1.0 } else { y_min.abs() * 0.1 };
        y_min -= pad;
        y_max += pad;
    } else {
        let pad = (y_max - y_min) * 0.05;
        y_min -= pad;
        y_max += pad;
    }
    let frame = Frame { x_min, x_max, y_min, y_max, log_x: style.log_x, width: style.width, height: style.height };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">",
        w = style.width,
        h = style.height
    );
    let _ = writeln!(out, "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "  <text class=\"title\" x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        style.width / 2.0,
        escape(&style.title)
    );
    if !style.annotation.is_empty() {
        let _ = writeln!(
            out,
            "  <text class=\"annotation\" x=\"{:.2}\" y=\"44\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
            style.width / 2.0,
            escape(&style.annotation)
        );
    }

    // Axes and ticks.
    let (left, right) = (MARGIN_LEFT, style.width - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, style.height - MARGIN_BOTTOM);
    let _ = writeln!(
        out,
        "  <path class=\"axes\" d=\"M{left:.2},{top:.2} L{left:.2},{bottom:.2} L{right:.2},{bottom:.2}\" fill=\"none\" stroke=\"black\"/>"
    );
    let x_ticks = if style.log_x { decade_ticks(x_min, x_max) } else { linear_ticks(x_min, x_max) };
    for t in x_ticks {
        let x = frame.x_of(t);
        let _ = writeln!(
            out,
            "  <line x1=\"{x:.2}\" y1=\"{bottom:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/><text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            bottom + 5.0,
            bottom + 18.0,
            fmt_tick(t)
        );
    }
    for t in linear_ticks(y_min, y_max) {
        let y = frame.y_of(t);
        let _ = writeln!(
            out,
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{left:.2}\" y2=\"{y:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"11\">{}</text>",
            left - 5.0,
            left - 8.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        (left + right) / 2.0,
        style.height - 18.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        out,
        "  <text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(&style.y_label)
    );

    let mut modes: Vec<AttackMode> = Vec::new();
    for p in &drawable {
        if !modes.contains(&p.mode) {
            modes.push(p.mode);
        }
    }
    for &mode in &modes {
        let _ = writeln!(out, "  <g class=\"mode\" data-mode=\"{mode}\">");
        let series: Vec<&CurvePoint> = drawable.iter().copied().filter(|p| p.mode == mode).collect();
        let mut runs: Vec<&[&CurvePoint]> = Vec::new();
        let mut start = 0;
        for i in 1..=series.len() {
            if i == series.len() || series[i].is_feasible() != series[start].is_feasible() {
                runs.push(&series[start..i]);
                start = i;
            }
        }
        for pair in runs.windows(2) {
            let joint = [*pair[0].last().unwrap(), pair[1][0]];
            polyline(&mut out, &frame, &joint, "bridge", color(mode), Some("1,4"));
        }
        for run in &runs {
            if run.len() < 2 {
                continue;
            }
            if run[0].is_feasible() {
                polyline(&mut out, &frame, run, "curve feasible", color(mode), None);
            } else {
                polyline(&mut out, &frame, run, "curve infeasible", color(mode), Some("6,4"));
            }
        }
        for p in &series {
            let class = if p.is_feasible() { "marker feasible" } else { "marker infeasible" };
            let fill = if p.is_feasible() { color(mode) } else { "white" };
            let _ = writeln!(
                out,
                "    <circle class=\"{class}\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{fill}\" stroke=\"{}\"/>",
                frame.x_of(p.coords[0]),
                frame.y_of(p.s_partial),
                color(mode)
            );
        }
        let _ = writeln!(out, "  </g>");
    }

    // Legend.
    let lx = left + 15.0;
    let mut ly = top + 15.0;
    for &mode in &modes {
        let _ = writeln!(
            out,
            "  <line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{}\" stroke-width=\"2\"/><text class=\"legend\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{}</text>",
            lx + 25.0,
            color(mode),
            lx + 32.0,
            ly + 4.0,
            legend_label(mode)
        );
        ly += 18.0;
    }
    let _ = writeln!(
        out,
        "  <line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"gray\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/><text class=\"legend\" x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">attack not executable (p_b or p_m outside [0, 1])</text>",
        lx + 25.0,
        lx + 32.0,
        ly + 4.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}
