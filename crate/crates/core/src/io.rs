//! CSV time series, JSON reports and density files.
//!
//! All writes go through a temporary file in the target directory that is
//! renamed into place, so readers never observe a partial file.

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::solver::TimeSeriesRecord;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const TIMESERIES_HEADER: &str = "t,mass,entropy_rel,lyap,production,min_u,newton_iters";

/// Write `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// 17 significant digits, enough to round-trip every finite double.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_timeseries(records: &[TimeSeriesRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1) * 2);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in records {
        let cols = [
            num(r.t),
            num(r.mass),
            num(r.entropy_rel),
            num(r.lyap),
            num(r.production),
            num(r.min_u),
        ];
        out.push_str(&cols.join(","));
        out.push(',');
        out.push_str(&r.newton_iters.to_string());
        out.push('\n');
    }
    out
}

pub fn emit_timeseries(records: &[TimeSeriesRecord], path: &Path) -> Result<()> {
    write_atomic(path, format_timeseries(records).as_bytes())
}

pub fn parse_timeseries(text: &str) -> Result<Vec<TimeSeriesRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == TIMESERIES_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header `{TIMESERIES_HEADER}`"),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 7 columns, found {}", cols.len()),
            });
        }
        let f = |i: usize| -> Result<f64> {
            cols[i].trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                reason: format!("column {}: {e}", i + 1),
            })
        };
        records.push(TimeSeriesRecord {
            t: f(0)?,
            mass: f(1)?,
            entropy_rel: f(2)?,
            lyap: f(3)?,
            production: f(4)?,
            min_u: f(5)?,
            newton_iters: cols[6].trim().parse().map_err(|e| Error::Parse {
                line,
                reason: format!("column 7: {e}"),
            })?,
        });
    }
    Ok(records)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TimeSeriesRecord>> {
    parse_timeseries(&std::fs::read_to_string(path)?)
}

/// Outcome of one constant certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub kind: String,
    pub value: f64,
    pub analytic: f64,
    pub rel_error: f64,
}

impl CertificationReport {
    pub fn new(kind: impl Into<String>, value: f64, analytic: f64) -> Self {
        Self {
            kind: kind.into(),
            value,
            analytic,
            rel_error: (value - analytic).abs() / analytic.abs(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = to_json(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Density values, one per line (`#` comments and blank lines ignored).
pub fn parse_density(text: &str, grid: &PeriodicGrid) -> Result<Field> {
    let mut values = Vec::with_capacity(grid.len());
    for (idx, raw) in text.lines().enumerate() {
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        values.push(s.parse::<f64>().map_err(|e| Error::Parse {
            line: idx + 1,
            reason: e.to_string(),
        })?);
    }
    if values.len() != grid.len() {
        return Err(Error::Validation {
            field: "path".into(),
            reason: format!("file holds {} values but N = {}", values.len(), grid.len()),
        });
    }
    Field::density(grid, values)
}

pub fn read_density_file(path: &Path, grid: &PeriodicGrid) -> Result<Field> {
    parse_density(&std::fs::read_to_string(path)?, grid)
}
