//! Result curves: worst-case FA estimates over `(N, tau)` with confidence
//! intervals, written as CSV, JSON or a standalone SVG plot.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One estimate row of a [`FaCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub n: u64,
    pub tau: f64,
    pub p_fa: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Sequence of `(N, tau, P_FA^N, CI)` records, in computation order.
#[derive(Debug, Clone, Default)]
pub struct FaCurve {
    rows: Vec<CurveRow>,
}

impl FaCurve {
    pub fn new() -> Self {
        FaCurve { rows: Vec::new() }
    }

    /// Appends a row, enforcing `0 <= ci_lo <= p_fa <= ci_hi <= 1` and `N >= 1`.
    pub fn push(&mut self, row: CurveRow) -> Result<()> {
        if row.n == 0 {
            return Err(Error::Invalid("curve row with N = 0".into()));
        }
        let ok = 0.0 <= row.ci_lo
            && row.ci_lo <= row.p_fa
            && row.p_fa <= row.ci_hi
            && row.ci_hi <= 1.0;
        if !ok {
            return Err(Error::Invalid(format!(
                "curve row violates 0 <= ci_lo <= p_fa <= ci_hi <= 1: {row:?}"
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }

    pub fn from_rows(rows: Vec<CurveRow>) -> Result<Self> {
        let mut c = FaCurve::new();
        for r in rows {
            c.push(r)?;
        }
        Ok(c)
    }

    /// Distinct thresholds in first-appearance order.
    pub fn taus(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|t| t == &r.tau) {
                out.push(r.tau);
            }
        }
        out
    }
}

/// Output formats for [`write_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFormat {
    Csv,
    Json,
    Svg,
}

/// Writes a curve to `path` in the requested format.
///
/// CSV carries the header `N,tau,p_fa,ci_lo,ci_hi` and one row per record
/// in input order. SVG plots `p_fa` against log-scaled `N`, one polyline
/// per distinct threshold with a shaded confidence band.
pub fn write_curve(curve: &FaCurve, path: impl AsRef<Path>, format: CurveFormat) -> Result<()> {
    let path = path.as_ref();
    let mut buf: Vec<u8> = Vec::new();
    match format {
        CurveFormat::Csv => render_csv(curve, &mut buf)?,
        CurveFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, curve.rows())
                .map_err(|e| Error::Invalid(e.to_string()))?;
            buf.push(b'\n');
        }
        CurveFormat::Svg => render_svg(curve, &mut buf)?,
    }
    std::fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

/// Reads back a JSON curve written by [`write_curve`].
pub fn read_curve_json(path: impl AsRef<Path>) -> Result<FaCurve> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<CurveRow> =
        serde_json::from_str(&text).map_err(|e| Error::Invalid(e.to_string()))?;
    FaCurve::from_rows(rows)
}

fn render_csv(curve: &FaCurve, out: &mut Vec<u8>) -> Result<()> {
    writeln!(out, "N,tau,p_fa,ci_lo,ci_hi").unwrap();
    for r in curve.rows() {
        writeln!(out, "{},{},{},{},{}", r.n, r.tau, r.p_fa, r.ci_lo, r.ci_hi).unwrap();
    }
    Ok(())
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn render_svg(curve: &FaCurve, out: &mut Vec<u8>) -> Result<()> {
    let (w, h) = (720.0, 480.0);
    let (ml, mr, mt, mb) = (64.0, 24.0, 24.0, 48.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);

    let ns: Vec<f64> = curve.rows().iter().map(|r| r.n as f64).collect();
    let (lo, hi) = match (
        ns.iter().cloned().fold(f64::INFINITY, f64::min),
        ns.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    ) {
        (lo, hi) if lo.is_finite() && hi.is_finite() => (lo.log10(), hi.log10()),
        _ => (0.0, 1.0),
    };
    let span = if (hi - lo).abs() < 1e-12 { 1.0 } else { hi - lo };
    let x = |n: f64| ml + (n.log10() - lo) / span * pw;
    let y = |p: f64| mt + (1.0 - p.clamp(0.0, 1.0)) * ph;

    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>").unwrap();

    // axes
    writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        mt + ph,
        ml + pw,
        mt + ph
    )
    .unwrap();
    writeln!(
        out,
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>",
        mt + ph
    )
    .unwrap();
    for k in 0..=4 {
        let p = k as f64 * 0.25;
        let yy = y(p);
        writeln!(
            out,
            "<line x1=\"{}\" y1=\"{yy}\" x2=\"{ml}\" y2=\"{yy}\" stroke=\"black\"/>\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{p:.2}</text>",
            ml - 4.0,
            ml - 8.0,
            yy + 4.0
        )
        .unwrap();
    }
    let mut dec = lo.floor() as i32;
    while (dec as f64) <= hi + 1e-9 {
        let n = 10f64.powi(dec);
        if n.log10() >= lo - 1e-9 {
            let xx = x(n);
            writeln!(
                out,
                "<line x1=\"{xx}\" y1=\"{}\" x2=\"{xx}\" y2=\"{}\" stroke=\"black\"/>\
                 <text x=\"{xx}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">1e{dec}</text>",
                mt + ph,
                mt + ph + 4.0,
                mt + ph + 18.0
            )
            .unwrap();
        }
        dec += 1;
    }
    writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">N (log scale)</text>",
        ml + pw / 2.0,
        h - 10.0
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">worst-case P_FA</text>",
        mt + ph / 2.0,
        mt + ph / 2.0
    )
    .unwrap();

    for (i, tau) in curve.taus().iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let rows: Vec<&CurveRow> = curve.rows().iter().filter(|r| r.tau == *tau).collect();

        let mut band = String::new();
        for r in &rows {
            band.push_str(&format!("{:.2},{:.2} ", x(r.n as f64), y(r.ci_lo)));
        }
        for r in rows.iter().rev() {
            band.push_str(&format!("{:.2},{:.2} ", x(r.n as f64), y(r.ci_hi)));
        }
        writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            band.trim_end()
        )
        .unwrap();

        let pts: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.n as f64), y(r.p_fa)))
            .collect();
        writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">tau = {tau}</text>",
            ml + 8.0,
            mt + 16.0 + 14.0 * i as f64
        )
        .unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    Ok(())
}
