//! Entropies, Lyapunov functionals and entropy production of a density.
//!
//! `(log u)_xx` is always obtained by differentiating the log-values, never
//! through quotient rules on derivatives of `u`.

use crate::error::{Error, Result};
use crate::grid::{DiffBackend, Field};
use serde::{Deserialize, Serialize};

/// Values at or below this floor are rejected as non-positive.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

fn check_positive(u: &Field) -> Result<()> {
    match u.values().iter().enumerate().find(|(_, &v)| !(v > POSITIVITY_FLOOR)) {
        Some((index, &value)) => Err(Error::NonPositiveDensity { index, value }),
        None => Ok(()),
    }
}

fn integrate_with(u: &Field, f: impl Fn(f64) -> f64) -> f64 {
    let g = u.grid();
    g.spacing() * u.values().iter().map(|&v| f(v)).sum::<f64>()
}

/// `int u log(u / u_bar) dx`.
pub fn entropy_relative(u: &Field, u_bar: f64) -> Result<f64> {
    check_positive(u)?;
    if !(u_bar > 0.0) {
        return Err(Error::NonPositiveDensity {
            index: usize::MAX,
            value: u_bar,
        });
    }
    Ok(integrate_with(u, |v| v * (v / u_bar).ln()))
}

/// `int u (log u - 1) dx`.
pub fn entropy_absolute(u: &Field) -> Result<f64> {
    check_positive(u)?;
    Ok(integrate_with(u, |v| v * (v.ln() - 1.0)))
}

/// `int (u - log u) dx`; bounded below by `L`.
pub fn lyapunov_u_minus_logu(u: &Field) -> Result<f64> {
    check_positive(u)?;
    Ok(integrate_with(u, |v| v - v.ln()))
}

/// `int u ((log u)_xx)^2 dx`.
pub fn entropy_production(u: &Field, backend: DiffBackend) -> Result<f64> {
    check_positive(u)?;
    let g = u.grid();
    let logs: Vec<f64> = u.values().iter().map(|v| v.ln()).collect();
    let lxx = g.diff(&logs, 2, backend);
    Ok(g.spacing() * u.values().iter().zip(&lxx).map(|(v, l)| v * l * l).sum::<f64>())
}

/// The two nonnegative parts `(4 int ((sqrt u)_xx)^2, (1/12) int u_x^4 / u^3)`
/// whose sum equals the entropy production in the continuum.
pub fn production_decomposition(u: &Field, backend: DiffBackend) -> Result<(f64, f64)> {
    check_positive(u)?;
    let g = u.grid();
    let h = g.spacing();
    let sqrt: Vec<f64> = u.values().iter().map(|v| v.sqrt()).collect();
    let sxx = g.diff(&sqrt, 2, backend);
    let sqrt_part = 4.0 * h * sxx.iter().map(|s| s * s).sum::<f64>();
    let ux = g.diff(u.values(), 1, backend);
    let quartic_part = h / 12.0
        * ux.iter()
            .zip(u.values())
            .map(|(d, v)| d.powi(4) / v.powi(3))
            .sum::<f64>();
    Ok((sqrt_part, quartic_part))
}

/// Both sides of `int u_x^2 u_xx / u^2 = (2/3) int u_x^4 / u^3`.
pub fn cubic_integration_by_parts(u: &Field, backend: DiffBackend) -> Result<(f64, f64)> {
    check_positive(u)?;
    let g = u.grid();
    let h = g.spacing();
    let ux = g.diff(u.values(), 1, backend);
    let uxx = g.diff(u.values(), 2, backend);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for ((&v, &d1), &d2) in u.values().iter().zip(&ux).zip(&uxx) {
        lhs += d1 * d1 * d2 / (v * v);
        rhs += d1.powi(4) / v.powi(3);
    }
    Ok((h * lhs, 2.0 / 3.0 * h * rhs))
}

/// Relative discrepancy `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_discrepancy(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    /// `int u log(u / mean(u))`
    pub entropy_rel: f64,
    /// `int u (log u - 1)`
    pub entropy_abs: f64,
    pub lyap_u_minus_logu: f64,
    pub production: f64,
    pub production_sqrt_part: f64,
    pub production_quartic_part: f64,
    pub mass: f64,
}

impl FunctionalReport {
    /// Relative mismatch between the production and its two-part decomposition.
    pub fn decomposition_error(&self) -> f64 {
        (self.production - self.production_sqrt_part - self.production_quartic_part).abs() / self.production.max(1e-30)
    }
}

pub fn report(u: &Field, backend: DiffBackend) -> Result<FunctionalReport> {
    check_positive(u)?;
    let mass = u.integrate();
    let (production_sqrt_part, production_quartic_part) = production_decomposition(u, backend)?;
    Ok(FunctionalReport {
        entropy_rel: entropy_relative(u, mass / u.grid().length())?,
        entropy_abs: entropy_absolute(u)?,
        lyap_u_minus_logu: lyapunov_u_minus_logu(u)?,
        production: entropy_production(u, backend)?,
        production_sqrt_part,
        production_quartic_part,
        mass,
    })
}
