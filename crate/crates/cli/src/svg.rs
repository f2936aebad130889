//! Self-contained SVG figures: a site × time density heatmap and stacked
//! line panels. Coordinates are printed with fixed precision so output is
//! byte-stable.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thouless_core::protocol::{EnsembleStats, ScanRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// Mean density over site × time.
    Heatmap,
    /// `ΔP/d`, `Γ^max`, Nity (and `F` when recorded) against time.
    Lines,
}

/// Heatmap columns beyond this are strided away.
const MAX_COLUMNS: usize = 300;
const WIDTH: f64 = 720.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn write_svg(stats: &EnsembleStats, kind: PlotKind, path: &Path) -> io::Result<()> {
    std::fs::write(path, render(stats, kind)?)
}

pub fn render(stats: &EnsembleStats, kind: PlotKind) -> io::Result<String> {
    if stats.points.is_empty() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "no recorded points to plot",
        ));
    }
    Ok(match kind {
        PlotKind::Heatmap => heatmap(stats),
        PlotKind::Lines => {
            let x: Vec<f64> = stats.points.iter().map(|p| p.t).collect();
            let mut panels = vec![
                Panel::new("ΔP/d", &x, stats.points.iter().map(|p| p.shift.mean)),
                Panel::new("Γmax", &x, stats.points.iter().map(|p| p.gamma_max.mean)),
                Panel::new("Nity", &x, stats.points.iter().map(|p| p.nity.mean)),
            ];
            if stats.points[0].fidelity.is_some() {
                let f = stats.points.iter().map(|p| p.fidelity.map_or(f64::NAN, |s| s.mean));
                panels.push(Panel::new("F", &x, f));
            }
            let markers = if stats.stage_times.len() > 2 {
                stats.stage_times[1..stats.stage_times.len() - 1].to_vec()
            } else {
                Vec::new()
            };
            lines("t (1/J)", &panels, &markers)
        }
    })
}

/// `F` and `ΔP/d` against disorder amplitude, with ±std error bars.
pub fn render_scan(rows: &[ScanRow]) -> io::Result<String> {
    if rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty scan"));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.amplitude).collect();
    let mut f = Panel::new("F", &x, rows.iter().map(|r| r.fidelity.mean));
    f.errors = Some(rows.iter().map(|r| r.fidelity.std).collect());
    let mut s = Panel::new("ΔP/d", &x, rows.iter().map(|r| r.shift.mean));
    s.errors = Some(rows.iter().map(|r| r.shift.std).collect());
    f.markers = true;
    s.markers = true;
    Ok(lines("disorder amplitude (J)", &[f, s], &[]))
}

struct Panel {
    label: &'static str,
    x: Vec<f64>,
    y: Vec<f64>,
    errors: Option<Vec<f64>>,
    markers: bool,
}

impl Panel {
    fn new(label: &'static str, x: &[f64], y: impl Iterator<Item = f64>) -> Self {
        Self {
            label,
            x: x.to_vec(),
            y: y.collect(),
            errors: None,
            markers: false,
        }
    }

    fn y_range(&self) -> (f64, f64) {
        let err = |i: usize| self.errors.as_ref().map_or(0.0, |e| e[i]);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (i, &y) in self.y.iter().enumerate().filter(|(_, y)| y.is_finite()) {
            lo = lo.min(y - err(i));
            hi = hi.max(y + err(i));
        }
        if !lo.is_finite() {
            return (0.0, 1.0);
        }
        let pad = ((hi - lo) * 0.08).max(0.05);
        (lo - pad, hi + pad)
    }
}

fn header(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#);
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 4.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn lines(x_label: &str, panels: &[Panel], markers: &[f64]) -> String {
    let panel_h = 150.0;
    let gap = 30.0;
    let height = MARGIN_TOP + panels.len() as f64 * (panel_h + gap) - gap + MARGIN_BOTTOM;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let x_all: Vec<f64> = panels.iter().flat_map(|p| p.x.iter().copied()).collect();
    let x_lo = x_all.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x_hi = x_all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x_hi <= x_lo {
        x_hi = x_lo + 1.0;
    }
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;

    let mut out = String::new();
    header(&mut out, WIDTH, height);
    for (k, panel) in panels.iter().enumerate() {
        let top = MARGIN_TOP + k as f64 * (panel_h + gap);
        let (y_lo, y_hi) = panel.y_range();
        let sy = |y: f64| top + panel_h - (y - y_lo) / (y_hi - y_lo) * panel_h;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN_LEFT:.2}" y="{top:.2}" width="{plot_w:.2}" height="{panel_h:.2}" fill="none" stroke="#444"/>"##
        );
        for y in ticks(y_lo, y_hi) {
            let py = sy(y);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT:.2}" y2="{py:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_LEFT - 4.0,
                MARGIN_LEFT - 6.0,
                py + 4.0,
                fmt_tick(y)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            top + panel_h / 2.0,
            top + panel_h / 2.0,
            panel.label
        );
        for &m in markers {
            let px = sx(m);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.2}" y1="{top:.2}" x2="{px:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                top + panel_h
            );
        }
        let points: Vec<String> = panel
            .x
            .iter()
            .zip(&panel.y)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline id="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            series_id(panel.label),
            points.join(" ")
        );
        if let Some(errors) = &panel.errors {
            for ((&x, &y), &e) in panel.x.iter().zip(&panel.y).zip(errors) {
                let _ = writeln!(
                    out,
                    r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                    sx(x),
                    sy(y - e),
                    sy(y + e)
                );
            }
        }
        if panel.markers {
            for (&x, &y) in panel.x.iter().zip(&panel.y) {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            }
        }
    }
    let bottom = height - MARGIN_BOTTOM;
    for x in ticks(x_lo, x_hi) {
        let px = sx(x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{bottom:.2}" x2="{px:.2}" y2="{:.2}" stroke="#444"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            bottom + 4.0,
            bottom + 18.0,
            fmt_tick(x)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        height - 10.0
    );
    out.push_str("</svg>\n");
    out
}

fn series_id(label: &str) -> &'static str {
    match label {
        "ΔP/d" => "shift",
        "Γmax" => "gamma_max",
        "Nity" => "nity",
        "F" => "fidelity",
        _ => "series",
    }
}

/// Black → red → yellow → white ramp for `v ∈ [0, 1]`.
fn heat(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let stops = [
        (0.0, [0.0, 0.0, 0.0]),
        (0.4, [180.0, 20.0, 30.0]),
        (0.75, [250.0, 200.0, 40.0]),
        (1.0, [255.0, 255.0, 255.0]),
    ];
    let k = stops.windows(2).position(|w| v <= w[1].0).unwrap_or(stops.len() - 2);
    let ((a, ca), (b, cb)) = (stops[k], stops[k + 1]);
    let s = (v - a) / (b - a);
    let c: Vec<u8> = (0..3).map(|i| (ca[i] + s * (cb[i] - ca[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn heatmap(stats: &EnsembleStats) -> String {
    let n = stats.n_sites;
    let stride = stats.points.len().div_ceil(MAX_COLUMNS);
    let columns: Vec<usize> = (0..stats.points.len()).step_by(stride).collect();
    let vmax = stats
        .points
        .iter()
        .flat_map(|p| p.density.iter().map(|d| d.mean))
        .fold(0.0, f64::max)
        .max(1e-12);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT - 60.0;
    let cell_h = 16.0;
    let plot_h = cell_h * n as f64;
    let height = MARGIN_TOP + plot_h + MARGIN_BOTTOM;
    let cell_w = plot_w / columns.len() as f64;

    let mut out = String::new();
    header(&mut out, WIDTH, height);
    for (c, &i) in columns.iter().enumerate() {
        let x = MARGIN_LEFT + c as f64 * cell_w;
        for (j, d) in stats.points[i].density.iter().enumerate() {
            // Site 1 at the top.
            let y = MARGIN_TOP + j as f64 * cell_h;
            let _ = writeln!(
                out,
                r#"<rect class="cell" data-site="{}" data-col="{c}" x="{x:.3}" y="{y:.3}" width="{:.3}" height="{cell_h:.3}" fill="{}"/>"#,
                j + 1,
                cell_w + 0.05,
                heat(d.mean / vmax)
            );
        }
    }
    for j in (1..=n).filter(|j| j % 2 == 1 || n <= 10) {
        let y = MARGIN_TOP + (j as f64 - 0.5) * cell_h + 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{y:.2}" text-anchor="end">{j}</text>"#,
            MARGIN_LEFT - 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">site</text>"#,
        MARGIN_TOP + plot_h / 2.0
    );
    let (t0, t1) = (stats.points[0].t, stats.last().t);
    let bottom = MARGIN_TOP + plot_h;
    if t1 > t0 {
        for t in ticks(t0, t1) {
            let px = MARGIN_LEFT + (t - t0) / (t1 - t0) * plot_w;
            let _ = writeln!(
                out,
                r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                bottom + 18.0,
                fmt_tick(t)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t (1/J)</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        height - 10.0
    );
    // Colour bar.
    let bar_x = MARGIN_LEFT + plot_w + 20.0;
    for k in 0..50 {
        let v = 1.0 - k as f64 / 49.0;
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x:.2}" y="{:.3}" width="14" height="{:.3}" fill="{}"/>"#,
            MARGIN_TOP + k as f64 * plot_h / 50.0,
            plot_h / 50.0 + 0.05,
            heat(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
        bar_x + 18.0,
        MARGIN_TOP + 10.0,
        fmt_tick(vmax)
    );
    let _ = writeln!(out, r#"<text x="{:.2}" y="{bottom:.2}">0</text>"#, bar_x + 18.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">⟨n⟩</text>"#, bar_x, MARGIN_TOP - 8.0);
    out.push_str("</svg>\n");
    out
}
