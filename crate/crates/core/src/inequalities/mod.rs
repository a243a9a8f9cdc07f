//! Sharp functional inequalities on the torus.
//!
//! Three Rayleigh-type quotients are covered:
//!
//! - Poincaré of order `n`: `int |u^(n)|^2 / int (u - mean u)^2`, infimum `(2 pi / L)^(2n)`
//! - logarithmic Sobolev of order `n`: `int |u^(n)|^2 / int u^2 log(u^2 / mean(u^2))`,
//!   infimum `(1/2) (2 pi / L)^(2n)`
//! - convex Sobolev with `1 < p <= 2`: `int sigma''(v) v_x^2 / int sigma(v)` where
//!   `sigma(v) = (v^p - mean(v)^p) / (p - 1)`, infimum `8 pi^2 / L^2`
//!
//! Each constant is checked by direct minimization ([`minimize_quotient`]) and
//! by following the heat flow ([`heatflow_verify`], [`remainder_r`]).

mod heatflow;
mod minimize;

pub use heatflow::{auto_horizon, heatflow_records, heatflow_verify, remainder_r, HeatFlow, HeatFlowRecord, Remainder};
pub use minimize::{minimize_multistart, minimize_quotient, random_admissible, MinimizeOptions, QuotientResult};

use crate::error::{Error, Result};
use crate::grid::{DiffBackend, Field, PeriodicGrid};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Denominators below this magnitude are rejected.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuotientKind {
    Poincare(u32),
    LogSobolev(u32),
    ConvexSobolev(f64),
}

impl QuotientKind {
    pub fn name(&self) -> &'static str {
        match self {
            QuotientKind::Poincare(_) => "poincare",
            QuotientKind::LogSobolev(_) => "logsob",
            QuotientKind::ConvexSobolev(_) => "convex",
        }
    }

    /// Derivative order appearing in the numerator.
    pub fn order(&self) -> u32 {
        match *self {
            QuotientKind::Poincare(n) | QuotientKind::LogSobolev(n) => n,
            QuotientKind::ConvexSobolev(_) => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QuotientKind::Poincare(0) | QuotientKind::LogSobolev(0) => {
                Err(Error::InvalidQuotient("derivative order n must be at least 1".into()))
            }
            QuotientKind::ConvexSobolev(p) if !(p > 1.0 && p <= 2.0) => {
                Err(Error::InvalidQuotient(format!("exponent p = {p} must lie in (1, 2]")))
            }
            _ => Ok(()),
        }
    }

    /// Closed-form infimum on a torus of length `length`.
    pub fn analytic(&self, length: f64) -> f64 {
        let k2 = (2.0 * PI / length).powi(2);
        match *self {
            QuotientKind::Poincare(n) => k2.powi(n as i32),
            QuotientKind::LogSobolev(n) => 0.5 * k2.powi(n as i32),
            QuotientKind::ConvexSobolev(_) => 2.0 * k2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientSpec {
    pub kind: QuotientKind,
    pub grid: PeriodicGrid,
    pub backend: DiffBackend,
}

impl QuotientSpec {
    pub fn new(kind: QuotientKind, grid: &PeriodicGrid) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            grid: grid.clone(),
            backend: DiffBackend::Spectral,
        })
    }

    pub fn with_backend(mut self, backend: DiffBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn analytic(&self) -> f64 {
        self.kind.analytic(self.grid.length())
    }
}

/// `x log x` extended by continuity to `x = 0`.
fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Numerator and denominator of the quotient.
pub(crate) fn parts(spec: &QuotientSpec, u: &[f64]) -> Result<(f64, f64)> {
    let g = &spec.grid;
    if u.len() != g.len() {
        return Err(Error::LengthMismatch {
            expected: g.len(),
            got: u.len(),
        });
    }
    let h = g.spacing();
    match spec.kind {
        QuotientKind::Poincare(n) => {
            let d = g.diff(u, n, spec.backend);
            let m = g.mean(u);
            Ok((
                h * d.iter().map(|x| x * x).sum::<f64>(),
                h * u.iter().map(|x| (x - m).powi(2)).sum::<f64>(),
            ))
        }
        QuotientKind::LogSobolev(n) => {
            let d = g.diff(u, n, spec.backend);
            let m2 = u.iter().map(|x| x * x).sum::<f64>() / g.len() as f64;
            let num = h * d.iter().map(|x| x * x).sum::<f64>();
            if !(m2 > 0.0) {
                return Err(Error::DegenerateDenominator(0.0));
            }
            let den = h * u.iter().map(|x| m2 * xlogx(x * x / m2)).sum::<f64>();
            Ok((num, den))
        }
        QuotientKind::ConvexSobolev(p) => {
            if let Some((index, &value)) = u.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
                return Err(Error::NonPositiveDensity { index, value });
            }
            let d = g.diff(u, 1, spec.backend);
            let num = h * u
                .iter()
                .zip(&d)
                .map(|(v, dv)| p * v.powf(p - 2.0) * dv * dv)
                .sum::<f64>();
            let vbar_p = g.mean(u).powf(p);
            let den = h * u.iter().map(|v| (v.powf(p) - vbar_p) / (p - 1.0)).sum::<f64>();
            Ok((num, den))
        }
    }
}

/// Value of the quotient at `u`.
pub fn quotient_value(spec: &QuotientSpec, u: &Field) -> Result<f64> {
    if u.grid() != &spec.grid {
        return Err(Error::GridMismatch);
    }
    let (num, den) = parts(spec, u.values())?;
    if den.abs() < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(num / den)
}

/// Both sides of the convex Sobolev inequality
/// `(1/(p-1)) [int u^2 - L (mean u^(2/p))^p] <= L^2 / (2 pi^2 p) int u_x^2`.
///
/// `p = 1` uses the logarithmic limit `int u^2 log(u^2 / mean(u^2))` on the left.
pub fn convex_sobolev_check(u: &Field, p: f64, backend: DiffBackend) -> Result<(f64, f64, bool)> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidQuotient(format!("exponent p = {p} must lie in [1, 2]")));
    }
    if let Some((index, &value)) = u.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveDensity { index, value });
    }
    let g = u.grid();
    let l = g.length();
    let vals = u.values();
    let lhs = if p == 1.0 {
        let m2 = g.mean(&vals.iter().map(|x| x * x).collect::<Vec<_>>());
        g.spacing() * vals.iter().map(|x| m2 * xlogx(x * x / m2)).sum::<f64>()
    } else {
        let sq: f64 = g.integrate(&vals.iter().map(|x| x * x).collect::<Vec<_>>());
        let pw = g.mean(&vals.iter().map(|x| x.powf(2.0 / p)).collect::<Vec<_>>());
        (sq - l * pw.powf(p)) / (p - 1.0)
    };
    let ux = g.diff(vals, 1, backend);
    let rhs = l * l / (2.0 * PI * PI * p) * g.integrate(&ux.iter().map(|x| x * x).collect::<Vec<_>>());
    Ok((lhs, rhs, lhs <= rhs + 1e-10))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FieldKind;
    use std::f64::consts::TAU;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(TAU, n).unwrap()
    }

    #[test]
    fn analytic_constants() {
        assert_eq!(QuotientKind::Poincare(1).analytic(TAU), 1.0);
        assert_eq!(QuotientKind::LogSobolev(3).analytic(TAU), 0.5);
        assert_eq!(QuotientKind::ConvexSobolev(1.5).analytic(TAU), 2.0);
        assert!((QuotientKind::Poincare(2).analytic(1.0) - (TAU).powi(4)).abs() < 1e-9);
        assert!((QuotientKind::LogSobolev(1).analytic(2.0) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_specs() {
        let g = grid(16);
        assert!(QuotientSpec::new(QuotientKind::Poincare(0), &g).is_err());
        assert!(QuotientSpec::new(QuotientKind::ConvexSobolev(1.0), &g).is_err());
        assert!(QuotientSpec::new(QuotientKind::ConvexSobolev(2.5), &g).is_err());
        assert!(QuotientSpec::new(QuotientKind::ConvexSobolev(2.0), &g).is_ok());
    }

    #[test]
    fn poincare_of_cosine_is_exact() {
        let g = grid(64);
        let u = Field::from_fn(&g, FieldKind::Generic, f64::cos).unwrap();
        for n in 1..=3 {
            let s = QuotientSpec::new(QuotientKind::Poincare(n), &g).unwrap();
            assert!((quotient_value(&s, &u).unwrap() - 1.0).abs() < 1e-12);
        }
        let g2 = PeriodicGrid::new(3.0, 64).unwrap();
        let u2 = Field::from_fn(&g2, FieldKind::Generic, |x| (TAU * x / 3.0).cos()).unwrap();
        let s2 = QuotientSpec::new(QuotientKind::Poincare(1), &g2).unwrap();
        assert!((quotient_value(&s2, &u2).unwrap() / (TAU / 3.0).powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constants_are_degenerate() {
        let g = grid(32);
        let c = Field::constant(&g, 2.0, FieldKind::Density).unwrap();
        for kind in [
            QuotientKind::Poincare(1),
            QuotientKind::LogSobolev(2),
            QuotientKind::ConvexSobolev(1.5),
        ] {
            let s = QuotientSpec::new(kind, &g).unwrap();
            assert!(matches!(quotient_value(&s, &c), Err(Error::DegenerateDenominator(_))));
        }
    }

    #[test]
    fn logsob_near_constant_approaches_half() {
        let g = grid(128);
        let s = QuotientSpec::new(QuotientKind::LogSobolev(1), &g).unwrap();
        let u = Field::from_fn(&g, FieldKind::Generic, |x| 1.0 + 1e-3 * x.cos()).unwrap();
        let q = quotient_value(&s, &u).unwrap();
        assert!((q - 0.5).abs() < 1e-3, "{q}");
    }

    #[test]
    fn convex_two_is_twice_poincare() {
        let g = grid(128);
        let v = Field::from_fn(&g, FieldKind::Density, |x| 1.0 + 0.3 * x.cos()).unwrap();
        let c = QuotientSpec::new(QuotientKind::ConvexSobolev(2.0), &g).unwrap();
        let p = QuotientSpec::new(QuotientKind::Poincare(1), &g).unwrap();
        let qc = quotient_value(&c, &v).unwrap();
        assert!((qc - 2.0 * quotient_value(&p, &v).unwrap()).abs() < 1e-12);
        assert!((qc - 2.0).abs() < 1e-12);
    }

    #[test]
    fn convex_sobolev_sides() {
        let g = grid(256);
        let c = Field::constant(&g, 1.7, FieldKind::Density).unwrap();
        let (l, r, ok) = convex_sobolev_check(&c, 1.5, DiffBackend::Spectral).unwrap();
        assert!(l.abs() < 1e-12 && r == 0.0 && ok);

        let u = Field::from_fn(&g, FieldKind::Density, |x| 1.0 + 0.3 * x.cos()).unwrap();
        // direct quadrature oracle at higher resolution
        let (lo, ro) = {
            let n = 8192;
            let h = TAU / n as f64;
            let xs: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
            let sq: f64 = xs.iter().map(|x| (1.0 + 0.3 * x.cos()).powi(2)).sum::<f64>() * h;
            let pw: f64 = xs.iter().map(|x| (1.0 + 0.3 * x.cos()).powf(2.0 / 1.5)).sum::<f64>() * h / TAU;
            let ux2: f64 = xs.iter().map(|x| (0.3 * x.sin()).powi(2)).sum::<f64>() * h;
            ((sq - TAU * pw.powf(1.5)) / 0.5, TAU * TAU / (2.0 * PI * PI * 1.5) * ux2)
        };
        let (l, r, ok) = convex_sobolev_check(&u, 1.5, DiffBackend::Spectral).unwrap();
        assert!(ok && l < r);
        assert!((l - lo).abs() < 1e-12 && (r - ro).abs() < 1e-12);

        let (l2, r2, ok2) = convex_sobolev_check(&u, 2.0, DiffBackend::Spectral).unwrap();
        let ubar = u.mean();
        let sq = u.map(|x| x * x).unwrap().integrate();
        assert!((l2 - (sq - TAU * ubar * ubar)).abs() < 1e-12);
        // single-mode perturbation of a constant makes p = 2 an equality
        assert!(ok2 && (r2 / l2 - 1.0).abs() < 1e-12);
    }
}
