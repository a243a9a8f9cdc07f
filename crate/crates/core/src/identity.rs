//! Randomized check of the entropy-production identities and of the
//! log-Sobolev / Poincaré chain bound.

use crate::error::{Error, Result};
use crate::functionals::{
    cubic_integration_by_parts, entropy_production, production_decomposition, relative_discrepancy,
};
use crate::grid::{DiffBackend, Field, PeriodicGrid};
use crate::rng::{default_max_mode, FourierSeries, SplitMix64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Order of the higher derivative in the chain bound.
pub const CHAIN_ORDER: u32 = 2;

/// Amplitude and geometric decay of the random exponents.
const AMPLITUDE: f64 = 0.6;
const DECAY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub trials: usize,
    pub seed: u64,
    pub backend: String,
    pub n_points: usize,
    pub length: f64,
    /// max over fields of `|P - (4 int ((sqrt u)_xx)^2 + (1/12) int u_x^4/u^3)| / P`
    pub decomposition_max_rel_error: f64,
    /// max over fields of the discrepancy in `int u_x^2 u_xx / u^2 = (2/3) int u_x^4 / u^3`
    pub ibp_max_rel_error: f64,
    /// fields violating `int u^2 log(u^2/mean(u^2)) <= (L^2 / 2 pi^2) int u_x^2`
    pub logsob_violations: usize,
    /// fields violating `int u_x^2 <= (L / 2 pi)^(2n - 2) int |u^(n)|^2`
    pub poincare_violations: usize,
    /// largest `lhs / rhs` seen in either link of the chain
    pub chain_max_ratio: f64,
    pub chain_order: u32,
}

/// Random mean-zero exponents for `trials` fields on a torus of length `length`.
pub fn random_exponents(seed: u64, trials: usize, length: f64, max_mode: usize) -> Vec<FourierSeries> {
    let mut rng = SplitMix64::new(seed);
    (0..trials)
        .map(|_| FourierSeries::random(&mut rng, length, max_mode, AMPLITUDE, DECAY))
        .collect()
}

/// `(logsob lhs, logsob rhs, poincare rhs)` of the chain bound for `u`.
pub fn chain_bound(u: &Field, n: u32, backend: DiffBackend) -> (f64, f64, f64) {
    let g = u.grid();
    let l = g.length();
    let vals = u.values();
    let m2 = vals.iter().map(|x| x * x).sum::<f64>() / vals.len() as f64;
    let ent = g.spacing()
        * vals
            .iter()
            .map(|x| if *x == 0.0 { 0.0 } else { x * x * (x * x / m2).ln() })
            .sum::<f64>();
    let d1 = g.diff(vals, 1, backend);
    let dn = g.diff(vals, n, backend);
    let i1 = g.integrate(&d1.iter().map(|x| x * x).collect::<Vec<_>>());
    let i_n = g.integrate(&dn.iter().map(|x| x * x).collect::<Vec<_>>());
    (
        ent,
        l * l / (2.0 * PI * PI) * i1,
        2.0 * (l / (2.0 * PI)).powi(2 * n as i32) * i_n,
    )
}

pub fn identity_suite(grid: &PeriodicGrid, backend: DiffBackend, trials: usize, seed: u64) -> Result<IdentityReport> {
    let series = random_exponents(seed, trials, grid.length(), default_max_mode(grid));
    let mut report = identity_suite_on(grid, backend, &series)?;
    report.seed = seed;
    Ok(report)
}

/// Run the checks on the fields `exp(g)` for the given exponents.
pub fn identity_suite_on(
    grid: &PeriodicGrid,
    backend: DiffBackend,
    exponents: &[FourierSeries],
) -> Result<IdentityReport> {
    if exponents.is_empty() {
        return Err(Error::InvalidConfig("identity suite needs at least one trial".into()));
    }
    let fields: Vec<Field> = exponents
        .iter()
        .map(|s| Field::density(grid, s.sample(grid).into_iter().map(f64::exp).collect()))
        .collect::<Result<_>>()?;
    let mut report = identity_suite_fields(&fields, backend)?;
    report.trials = exponents.len();
    Ok(report)
}

pub fn identity_suite_fields(fields: &[Field], backend: DiffBackend) -> Result<IdentityReport> {
    let grid = fields
        .first()
        .ok_or_else(|| Error::InvalidConfig("identity suite needs at least one trial".into()))?
        .grid()
        .clone();
    let mut report = IdentityReport {
        trials: fields.len(),
        seed: 0,
        backend: backend.name().to_string(),
        n_points: grid.len(),
        length: grid.length(),
        decomposition_max_rel_error: 0.0,
        ibp_max_rel_error: 0.0,
        logsob_violations: 0,
        poincare_violations: 0,
        chain_max_ratio: 0.0,
        chain_order: CHAIN_ORDER,
    };
    for u in fields {
        let p = entropy_production(u, backend)?;
        let (a, b) = production_decomposition(u, backend)?;
        report.decomposition_max_rel_error = report.decomposition_max_rel_error.max(relative_discrepancy(p, a + b));
        let (lhs, rhs) = cubic_integration_by_parts(u, backend)?;
        report.ibp_max_rel_error = report.ibp_max_rel_error.max(relative_discrepancy(lhs, rhs));

        let (ent, mid, top) = chain_bound(u, CHAIN_ORDER, backend);
        let slack = 1e-12 * top.abs().max(mid.abs()).max(f64::MIN_POSITIVE);
        if ent > mid + slack {
            report.logsob_violations += 1;
        }
        if mid > top + slack {
            report.poincare_violations += 1;
        }
        for (x, y) in [(ent, mid), (mid, top)] {
            if y > 0.0 {
                report.chain_max_ratio = report.chain_max_ratio.max(x / y);
            }
        }
    }
    Ok(report)
}
