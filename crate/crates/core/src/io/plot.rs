//! Three-panel SVG figures, one per analysis window: annualized drift,
//! annualized volatility and normalized potential against log-price, with
//! one curve per lag. Masked grid nodes break curves. Potential minima are
//! drawn as circles and every barrier as a vertical bar from the shallower
//! minimum's level up to the separating maximum.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::pipeline::{Cell, CellAnalysis};
use crate::{Error, Result};

use super::bundle::ResultBundle;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 40.0;
const LEGEND_H: f64 = 70.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Panel {
    Drift,
    Volatility,
    Potential,
}

impl Panel {
    const ALL: [Panel; 3] = [Panel::Drift, Panel::Volatility, Panel::Potential];

    fn name(self) -> &'static str {
        match self {
            Panel::Drift => "drift",
            Panel::Volatility => "volatility",
            Panel::Potential => "potential",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Panel::Drift => "drift \u{3bc}(x) [1/yr]",
            Panel::Volatility => "volatility \u{3c3}(x) [1/\u{221a}yr]",
            Panel::Potential => "potential U(x), min = 0 [1/yr]",
        }
    }
}

/// Curve points with `None` marking a masked node.
fn series(a: &CellAnalysis, panel: Panel, year: f64) -> (Vec<f64>, Vec<Option<f64>>) {
    let est = &a.estimate;
    let pick = |v: &[f64]| -> Vec<Option<f64>> {
        v.iter()
            .zip(&est.valid)
            .map(|(&y, &ok)| (ok && y.is_finite()).then_some(y))
            .collect()
    };
    match panel {
        Panel::Drift => (est.grid.clone(), pick(&est.mu_ann)),
        Panel::Volatility => (est.grid.clone(), pick(&est.sigma_ann)),
        Panel::Potential => (
            a.potential.grid.clone(),
            a.potential.u.iter().map(|u| Some(u * year)).collect(),
        ),
    }
}

/// Human-readable observation scale.
pub fn format_scale(seconds: f64) -> String {
    if seconds < 3600.0 {
        format!("{:.1} min", seconds / 60.0)
    } else if seconds < 86_400.0 {
        format!("{:.2} h", seconds / 3600.0)
    } else {
        format!("{:.2} d", seconds / 86_400.0)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    (0..)
        .map(|k| first + k as f64 * step)
        .take_while(|&t| t <= hi + 1e-9 * span)
        .collect()
}

struct Frame {
    x0: f64,
    y0: f64,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xlo) / (self.xhi - self.xlo) * PANEL_W
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + PANEL_H - (y - self.ylo) / (self.yhi - self.ylo) * PANEL_H
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - d, hi + d)
    }
}

/// SVG path data; a new `M` starts after every masked node.
fn path_data(frame: &Frame, xs: &[f64], ys: &[Option<f64>]) -> String {
    let mut d = String::new();
    let mut pen_down = false;
    for (&x, y) in xs.iter().zip(ys) {
        match y {
            Some(y) => {
                let cmd = if pen_down { 'L' } else { 'M' };
                write!(d, "{cmd}{:.2},{:.2} ", frame.px(x), frame.py(*y)).unwrap();
                pen_down = true;
            }
            None => pen_down = false,
        }
    }
    d.trim_end().to_string()
}

/// Renders one window's cells into a standalone SVG document.
pub fn render_window(
    window_index: usize,
    cells: &[(&Cell, &CellAnalysis)],
    year_seconds: f64,
) -> String {
    let width = MARGIN_L + 2.0 * (PANEL_W + GAP + MARGIN_L) + PANEL_W + GAP;
    let height = MARGIN_T + PANEL_H + 50.0 + LEGEND_H;

    // shared x range over all plotted nodes in the window
    let mut xlo = f64::INFINITY;
    let mut xhi = f64::NEG_INFINITY;
    for (_, a) in cells {
        for p in Panel::ALL {
            let (xs, ys) = series(a, p, year_seconds);
            for (x, y) in xs.iter().zip(&ys) {
                if y.is_some() {
                    xlo = xlo.min(*x);
                    xhi = xhi.max(*x);
                }
            }
        }
    }
    let (xlo, xhi) = padded(xlo, xhi);

    let mut svg = String::new();
    let (first, _) = cells[0];
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11" data-window="{window_index}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{:.1}" y="18" font-size="14" text-anchor="middle">window {window_index}: t in [{}, {}) s</text>"#,
        width / 2.0,
        first.window.start,
        first.window.end
    )
    .unwrap();

    for (pi, panel) in Panel::ALL.into_iter().enumerate() {
        let x0 = MARGIN_L + pi as f64 * (PANEL_W + GAP + MARGIN_L);
        let mut ylo = f64::INFINITY;
        let mut yhi = f64::NEG_INFINITY;
        for (_, a) in cells {
            for y in series(a, panel, year_seconds).1.into_iter().flatten() {
                ylo = ylo.min(y);
                yhi = yhi.max(y);
            }
        }
        let (ylo, yhi) = padded(ylo, yhi);
        let frame = Frame {
            x0,
            y0: MARGIN_T,
            xlo,
            xhi,
            ylo,
            yhi,
        };

        writeln!(svg, r#"<g class="panel" data-panel="{}">"#, panel.name()).unwrap();
        writeln!(
            svg,
            r##"<rect x="{x0:.2}" y="{MARGIN_T:.2}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
            x0 + PANEL_W / 2.0,
            MARGIN_T - 8.0,
            panel.title()
        )
        .unwrap();
        for t in nice_ticks(xlo, xhi, 5) {
            let px = frame.px(t);
            writeln!(
                svg,
                r##"<line class="tick" x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                MARGIN_T + PANEL_H,
                MARGIN_T + PANEL_H + 4.0,
                MARGIN_T + PANEL_H + 16.0,
                fmt_tick(t)
            )
            .unwrap();
        }
        for t in nice_ticks(ylo, yhi, 5) {
            let py = frame.py(t);
            writeln!(
                svg,
                r##"<line class="tick" x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                py + 4.0,
                fmt_tick(t)
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">log-price x</text>"#,
            x0 + PANEL_W / 2.0,
            MARGIN_T + PANEL_H + 32.0
        )
        .unwrap();

        for (cell, a) in cells {
            let color = PALETTE[cell.lag_index % PALETTE.len()];
            let (xs, ys) = series(a, panel, year_seconds);
            writeln!(
                svg,
                r#"<path class="curve" data-lag-index="{}" data-lag-seconds="{}" fill="none" stroke="{color}" stroke-width="1.5" d="{}"/>"#,
                cell.lag_index,
                a.mean_dt,
                path_data(&frame, &xs, &ys)
            )
            .unwrap();
            if panel == Panel::Potential {
                draw_wells(&mut svg, &frame, cell, a, color, year_seconds);
            }
        }
        writeln!(svg, "</g>").unwrap();
    }

    // legend
    let ly = MARGIN_T + PANEL_H + 50.0;
    writeln!(svg, r#"<g class="legend">"#).unwrap();
    for (k, (cell, a)) in cells.iter().enumerate() {
        let color = PALETTE[cell.lag_index % PALETTE.len()];
        let lx = MARGIN_L + (k % 4) as f64 * 220.0;
        let y = ly + (k / 4) as f64 * 16.0;
        writeln!(
            svg,
            r#"<g class="legend-entry" data-lag-index="{}"><line x1="{lx:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">lag {} steps = {} ({})</text></g>"#,
            cell.lag_index,
            lx + 24.0,
            lx + 30.0,
            y + 4.0,
            a.lag_steps,
            format_scale(a.mean_dt),
            a.wells.classification
        )
        .unwrap();
    }
    writeln!(svg, "</g>").unwrap();
    svg.push_str("</svg>\n");
    svg
}

fn draw_wells(
    svg: &mut String,
    frame: &Frame,
    cell: &Cell,
    a: &CellAnalysis,
    color: &str,
    year: f64,
) {
    let ws = &a.wells;
    for m in &ws.minima {
        writeln!(
            svg,
            r#"<circle class="minimum" data-lag-index="{}" cx="{:.2}" cy="{:.2}" r="4" fill="{color}" stroke="black"/>"#,
            cell.lag_index,
            frame.px(m.position),
            frame.py(m.value * year)
        )
        .unwrap();
    }
    for (pair, (top, height)) in ws.minima.windows(2).zip(ws.maxima.iter().zip(&ws.barriers)) {
        let base = pair[0].value.max(pair[1].value) * year;
        let px = frame.px(top.position);
        writeln!(
            svg,
            r#"<g class="barrier" data-lag-index="{}"><line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="3,2"/><text x="{:.2}" y="{:.2}" fill="{color}">&#916;U={}</text></g>"#,
            cell.lag_index,
            frame.py(base),
            frame.py(top.value * year),
            px + 4.0,
            frame.py(top.value * year) - 4.0,
            fmt_tick(height * year)
        )
        .unwrap();
    }
}

/// Writes `window_<i>.svg` into `out_dir` for every window with at least
/// one computed cell.
pub fn emit_plots(bundle: &ResultBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for w in 0..bundle.plan.windows.len() {
        let cells: Vec<(&Cell, &CellAnalysis)> = bundle
            .cells
            .iter()
            .filter(|c| c.window_index == w)
            .filter_map(|c| c.analysis().map(|a| (c, a)))
            .collect();
        if cells.is_empty() {
            continue;
        }
        let path = out_dir.join(format!("window_{w}.svg"));
        super::atomic_write(
            &path,
            render_window(w, &cells, bundle.plan.year_seconds).as_bytes(),
        )?;
        files.push(path);
    }
    if files.is_empty() {
        return Err(Error::InsufficientData("no computed cells to plot".into()));
    }
    Ok(files)
}
