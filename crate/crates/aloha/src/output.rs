//! File formats: `samples.csv`, `ccdf.csv`, `fit.json`, `summary.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use aloha_core::tail::{CcdfPoints, TailFit, Window};
use serde::{Deserialize, Serialize};

use crate::error::{csv_error, AppError, Result};

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| AppError::io(path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

pub fn write_ccdf(path: &Path, points: &CcdfPoints) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["x", "survival"])
        .map_err(|e| csv_error(path, e))?;
    for (x, p) in points.x.iter().zip(&points.survival) {
        w.write_record([format_float(*x), format_float(*p)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

#[derive(Deserialize)]
struct CcdfRow {
    x: f64,
    survival: f64,
}

/// Reads a `ccdf.csv` back; the header must be `x,survival`.
pub fn read_ccdf(path: &Path) -> Result<CcdfPoints> {
    let file = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "survival"] {
        return Err(AppError::config(format!(
            "{}: expected header `x,survival`",
            path.display()
        )));
    }
    let mut x = Vec::new();
    let mut survival = Vec::new();
    for row in r.deserialize::<CcdfRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        x.push(row.x);
        survival.push(row.survival);
    }
    CcdfPoints::from_curve(x, survival)
        .map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    pub intercept: Option<f64>,
    pub window_hi: f64,
    pub window_lo: f64,
    pub points_used: usize,
    pub reliable: bool,
    pub sample_count: usize,
    pub quantity: Option<String>,
    pub reference_slope: Option<f64>,
    pub reference_kind: Option<String>,
    /// Why no slope could be fitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FitSummary {
    pub fn from_fit(fit: &TailFit, sample_count: usize) -> Self {
        Self {
            slope: Some(fit.slope),
            stderr: Some(fit.stderr),
            intercept: Some(fit.intercept),
            window_hi: fit.window.hi,
            window_lo: fit.window.lo,
            points_used: fit.points_used,
            reliable: fit.reliable,
            sample_count,
            quantity: None,
            reference_slope: None,
            reference_kind: None,
            error: None,
        }
    }

    pub fn failed(window: Window, sample_count: usize, error: String) -> Self {
        Self {
            slope: None,
            stderr: None,
            intercept: None,
            window_hi: window.hi,
            window_lo: window.lo,
            points_used: 0,
            reliable: false,
            sample_count,
            quantity: None,
            reference_slope: None,
            reference_kind: None,
            error: Some(error),
        }
    }
}

/// Parses `lo:hi`, e.g. `1e-3:1e-1`.
pub fn parse_window(text: &str) -> Result<Window> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| AppError::config(format!("window `{text}`: expected lo:hi")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| AppError::config(format!("window `{text}`: {e}")))
    };
    Ok(Window::new(parse(hi)?, parse(lo)?)?)
}
