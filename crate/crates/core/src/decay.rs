//! Exponential decay-rate fit of an entropy time series.

use crate::entropy_decay_rate;
use crate::error::{Error, Result};
use crate::solver::TimeSeriesRecord;
use serde::{Deserialize, Serialize};

/// Minimum number of samples inside the fit window.
pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub fitted_rate: f64,
    #[serde(rename = "theoretical_M")]
    pub theoretical_m: f64,
    pub ratio: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares fit of `log E = a - rate * t` over samples with `t` in `window`
/// (inclusive), compared with `32 pi^4 / L^4`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64), length: f64) -> Result<DecayReport> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: pts.len(),
            need: MIN_SAMPLES,
        });
    }
    if let Some(&(t, value)) = pts.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::NonPositiveEntropy { t, value });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(t, e) in &pts {
        let (dx, dy) = (t - tm, e.ln() - ym);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData { got: 1, need: 2 });
    }
    let slope = sxy / sxx;
    let ss_res: f64 = pts.iter().map(|&(t, e)| (e.ln() - ym - slope * (t - tm)).powi(2)).sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    let fitted_rate = -slope;
    let theoretical_m = entropy_decay_rate(length);
    Ok(DecayReport {
        fitted_rate,
        theoretical_m,
        ratio: fitted_rate / theoretical_m,
        fit_window: window,
        r_squared,
        samples: pts.len(),
    })
}

/// Window dropping the first 20% of samples and ending before `E` first falls
/// below `1e-12 E(0)`.
pub fn default_window(series: &[(f64, f64)]) -> (f64, f64) {
    let Some(&(_, e0)) = series.first() else {
        return (0.0, 0.0);
    };
    let lo = series[((series.len() as f64 * 0.2).ceil() as usize).min(series.len() - 1)].0;
    let stop = series.iter().position(|&(_, e)| e < 1e-12 * e0).unwrap_or(series.len());
    let hi = series[stop.saturating_sub(1)].0;
    (lo, hi)
}

/// `(t, entropy_rel)` pairs of a record list.
pub fn entropy_series(records: &[TimeSeriesRecord]) -> Vec<(f64, f64)> {
    records.iter().map(|r| (r.t, r.entropy_rel)).collect()
}

/// Fit over the default window.
pub fn fit_records(records: &[TimeSeriesRecord], length: f64) -> Result<DecayReport> {
    let series = entropy_series(records);
    fit_decay(&series, default_window(&series), length)
}
