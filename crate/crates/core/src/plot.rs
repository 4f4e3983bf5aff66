//! Hand-written SVG line plots of traces.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// `lambda_direct`, `lambda_integral` and optionally `lambda_reference`.
    Lambda,
    /// Real-slice trajectories `xi[x]` with the `barrier` overlay.
    Fan,
    /// Boundary trajectory angle `theta`.
    Trajectory,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Self::Lambda),
            "fan" => Ok(Self::Fan),
            "trajectory" => Ok(Self::Trajectory),
            other => Err(Error::Trace(format!("unknown plot kind `{other}` (lambda, fan, trajectory)"))),
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

struct Series<'a> {
    label: &'a str,
    values: &'a [f64],
    color: &'a str,
    dashed: bool,
    width: f64,
}

fn select<'a>(trace: &'a TraceRecord, kind: PlotKind) -> Result<(String, Vec<Series<'a>>)> {
    let need = |name: &str| {
        trace
            .column(name)
            .ok_or_else(|| Error::Trace(format!("plot kind {kind:?} needs column `{name}`")))
    };
    let mut out = Vec::new();
    let title = match kind {
        PlotKind::Lambda => {
            out.push(Series { label: "lambda_direct", values: need("lambda_direct")?, color: PALETTE[0], dashed: false, width: 2.0 });
            out.push(Series { label: "lambda_integral", values: need("lambda_integral")?, color: PALETTE[1], dashed: true, width: 2.0 });
            if let Some(r) = trace.column("lambda_reference") {
                out.push(Series { label: "lambda_reference", values: r, color: PALETTE[2], dashed: true, width: 1.0 });
            }
            "spectral function"
        }
        PlotKind::Fan => {
            for (i, c) in trace.columns.iter().filter(|c| c.name.starts_with("xi[")).enumerate() {
                out.push(Series { label: &c.name, values: &c.values, color: PALETTE[i % PALETTE.len()], dashed: false, width: 1.5 });
            }
            if out.is_empty() {
                return Err(Error::Trace("plot kind Fan needs `xi[...]` columns".into()));
            }
            if let Some(b) = trace.column("barrier") {
                out.push(Series { label: "barrier", values: b, color: "#000000", dashed: true, width: 2.0 });
            }
            "real-slice trajectories"
        }
        PlotKind::Trajectory => {
            out.push(Series { label: "theta", values: need("theta")?, color: PALETTE[0], dashed: false, width: 2.0 });
            "boundary trajectory angle"
        }
    };
    Ok((format!("{}: {title}", trace.scenario), out))
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Deterministic SVG for the trace.
pub fn render_plot(trace: &TraceRecord, kind: PlotKind) -> Result<String> {
    if trace.is_empty() {
        return Err(Error::Trace("cannot plot an empty trace".into()));
    }
    let (title, series) = select(trace, kind)?;
    let (x0, x1) = range(trace.times.iter().copied());
    let (y0, y1) = range(series.iter().flat_map(|s| s.values.iter().copied()));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 600" width="800" height="600">"#).unwrap();
    writeln!(s, r##"<rect x="0" y="0" width="800" height="600" fill="#ffffff"/>"##).unwrap();
    writeln!(s, r#"<text x="400" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{}</text>"#, escape(&title)).unwrap();
    writeln!(s, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444444"/>"##).unwrap();
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{:.4}</text>"#, sx(fx), HEIGHT - BOTTOM + 18.0, fx).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{:.4}</text>"#, LEFT - 6.0, sy(fy) + 4.0, fy).unwrap();
    }
    writeln!(s, r#"<text x="400" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, HEIGHT - 15.0, escape(&trace.index_name)).unwrap();
    for (i, ser) in series.iter().enumerate() {
        let mut pts = String::new();
        for (t, v) in trace.times.iter().zip(ser.values) {
            if v.is_finite() {
                write!(pts, "{:.2},{:.2} ", sx(*t), sy(*v)).unwrap();
            }
        }
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="{}"{dash} points="{}"/>"#, ser.color, ser.width, pts.trim_end()).unwrap();
        let ly = TOP + 16.0 + 16.0 * i as f64;
        writeln!(s, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/>"#, WIDTH - RIGHT - 190.0, WIDTH - RIGHT - 160.0, ser.color).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#, WIDTH - RIGHT - 154.0, ly + 4.0, escape(ser.label)).unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders first so that a failing plot leaves no file behind.
pub fn emit_plot(trace: &TraceRecord, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render_plot(trace, kind)?;
    std::fs::write(path, svg)?;
    Ok(())
}
