//! Preconditioned gradient descent on the quotients.

use super::{heatflow, parts, QuotientKind, QuotientSpec, DEGENERATE_DENOMINATOR};
use crate::error::{Error, Result};
use crate::grid::{Field, FieldKind};
use crate::rng::{default_max_mode, FourierSeries, SplitMix64};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientResult {
    pub kind: QuotientKind,
    pub value: f64,
    pub minimizer: Field,
    pub iterations: usize,
    /// Relative change of the quotient over the last accepted iteration.
    pub residual: f64,
    pub analytic: f64,
    /// Integral remainder along the heat-type flow started from the minimizer.
    pub remainder: Option<f64>,
    /// False when the iteration budget ran out before the stopping test held.
    pub converged: bool,
    /// Seed of the random start, when the run was part of a multistart.
    pub seed: Option<u64>,
}

impl QuotientResult {
    pub fn rel_error(&self) -> f64 {
        (self.value - self.analytic).abs() / self.analytic.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop once the relative change of the quotient drops below this.
    pub tol: f64,
    pub remainder: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-12,
            remainder: false,
        }
    }
}

const MAX_HALVINGS: usize = 40;
const ARMIJO: f64 = 1e-4;

fn value(spec: &QuotientSpec, u: &[f64]) -> Option<f64> {
    match parts(spec, u) {
        Ok((n, d)) if d.abs() >= DEGENERATE_DENOMINATOR && (n / d).is_finite() => Some(n / d),
        _ => None,
    }
}

/// L2 gradients of numerator and denominator with respect to nodal values.
fn gradients(spec: &QuotientSpec, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g = &spec.grid;
    let b = spec.backend;
    match spec.kind {
        QuotientKind::Poincare(n) | QuotientKind::LogSobolev(n) => {
            let sign = if n % 2 == 0 { 2.0 } else { -2.0 };
            let dnum: Vec<f64> = g.diff(&g.diff(u, n, b), n, b).into_iter().map(|x| sign * x).collect();
            let dden = if let QuotientKind::Poincare(_) = spec.kind {
                let m = g.mean(u);
                u.iter().map(|x| 2.0 * (x - m)).collect()
            } else {
                let m2 = u.iter().map(|x| x * x).sum::<f64>() / g.len() as f64;
                u.iter()
                    .map(|&x| if x == 0.0 { 0.0 } else { 2.0 * x * (x * x / m2).ln() })
                    .collect()
            };
            (dnum, dden)
        }
        QuotientKind::ConvexSobolev(p) => {
            let vx = g.diff(u, 1, b);
            let flux: Vec<f64> = u.iter().zip(&vx).map(|(v, d)| p * v.powf(p - 2.0) * d).collect();
            let dflux = g.diff(&flux, 1, b);
            let dnum = u
                .iter()
                .zip(&vx)
                .zip(&dflux)
                .map(|((v, d), f)| p * (p - 2.0) * v.powf(p - 3.0) * d * d - 2.0 * f)
                .collect();
            let vbar = g.mean(u).powf(p - 1.0);
            let dden = u.iter().map(|v| p / (p - 1.0) * (v.powf(p - 1.0) - vbar)).collect();
            (dnum, dden)
        }
    }
}

/// Inverse of `s + kappa^(2n)` in Fourier space, with the Nyquist mode removed.
fn precondition(spec: &QuotientSpec, r: &[f64]) -> Vec<f64> {
    let g = &spec.grid;
    let n = spec.kind.order() as i32;
    let s = (g.base_wavenumber().powi(2)).powi(n);
    let mut spec_r = g.forward(r);
    for (idx, z) in spec_r.iter_mut().enumerate() {
        if g.is_nyquist(idx) {
            *z = Complex64::new(0.0, 0.0);
        } else {
            let kappa = g.base_wavenumber() * g.mode(idx) as f64;
            *z /= s + kappa.powi(2).powi(n);
        }
    }
    g.inverse(spec_r)
}

fn remove_nyquist(spec: &QuotientSpec, u: &[f64]) -> Vec<f64> {
    let g = &spec.grid;
    let mut s = g.forward(u);
    s[g.len() / 2] = Complex64::new(0.0, 0.0);
    g.inverse(s)
}

/// Fix the scale (and for Poincaré the mean) on which the quotient does not depend.
fn gauge(spec: &QuotientSpec, u: &mut [f64]) {
    let g = &spec.grid;
    match spec.kind {
        QuotientKind::Poincare(_) => {
            let m = g.mean(u);
            u.iter_mut().for_each(|x| *x -= m);
            let rms = (u.iter().map(|x| x * x).sum::<f64>() / u.len() as f64).sqrt();
            if rms > 0.0 {
                u.iter_mut().for_each(|x| *x /= rms);
            }
        }
        QuotientKind::LogSobolev(_) => {
            let rms = (u.iter().map(|x| x * x).sum::<f64>() / u.len() as f64).sqrt();
            if rms > 0.0 {
                u.iter_mut().for_each(|x| *x /= rms);
            }
        }
        QuotientKind::ConvexSobolev(_) => {
            let m = g.mean(u);
            if m > 0.0 {
                u.iter_mut().for_each(|x| *x /= m);
            }
        }
    }
}

/// Minimize the quotient from `u_init` with default options.
pub fn minimize_quotient(spec: &QuotientSpec, u_init: &Field, max_iters: usize, tol: f64) -> Result<QuotientResult> {
    minimize_with(
        spec,
        u_init,
        MinimizeOptions {
            max_iters,
            tol,
            ..Default::default()
        },
    )
}

/// Gradient descent preconditioned by `(s + kappa^(2n))^-1` with Armijo
/// backtracking. Iterates are gauge-normalized after every step and kept free
/// of the Nyquist mode, on which odd spectral derivatives vanish.
pub fn minimize_with(spec: &QuotientSpec, u_init: &Field, opts: MinimizeOptions) -> Result<QuotientResult> {
    spec.kind.validate()?;
    if u_init.grid() != &spec.grid {
        return Err(Error::GridMismatch);
    }
    let h = spec.grid.spacing();
    let mut u = remove_nyquist(spec, u_init.values());
    gauge(spec, &mut u);
    let (num, den) = parts(spec, &u)?;
    if den.abs() < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateDenominator(den));
    }
    let mut q = num / den;
    let mut alpha = 1.0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let (_, den) = parts(spec, &u)?;
        let (gn, gd) = gradients(spec, &u);
        let grad: Vec<f64> = gn.iter().zip(&gd).map(|(a, b)| (a - q * b) / den).collect();
        let dir: Vec<f64> = precondition(spec, &grad).into_iter().map(|x| -0.5 * den * x).collect();
        let slope = h * grad.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        if !(slope < 0.0) {
            residual = 0.0;
            converged = true;
            break;
        }

        let mut accepted = None;
        let mut a = alpha;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(x, d)| x + a * d).collect();
            if let Some(qt) = value(spec, &trial) {
                if qt <= q + ARMIJO * a * slope {
                    accepted = Some((trial, qt));
                    break;
                }
            }
            a *= 0.5;
        }
        let Some((mut trial, _)) = accepted else {
            // no descent left at roundoff level
            residual = 0.0;
            converged = true;
            break;
        };
        alpha = (2.0 * a).min(1.0);
        gauge(spec, &mut trial);
        let qn = match value(spec, &trial) {
            Some(v) => v,
            None => break,
        };
        residual = (q - qn).abs() / qn.abs().max(f64::MIN_POSITIVE);
        u = trial;
        q = qn;
        if residual < opts.tol {
            converged = true;
            break;
        }
    }

    let kind = match spec.kind {
        QuotientKind::ConvexSobolev(_) => FieldKind::Density,
        _ => FieldKind::Generic,
    };
    let minimizer = Field::new(&spec.grid, u, kind)?;
    let remainder = if opts.remainder {
        minimizer_remainder(spec, &minimizer)
    } else {
        None
    };
    Ok(QuotientResult {
        kind: spec.kind,
        value: q,
        minimizer,
        iterations,
        residual,
        analytic: spec.analytic(),
        remainder,
        converged,
        seed: None,
    })
}

fn minimizer_remainder(spec: &QuotientSpec, u: &Field) -> Option<f64> {
    let (v, p) = match spec.kind {
        QuotientKind::LogSobolev(1) => (u.map(|x| x * x).ok()?, 1.0),
        QuotientKind::ConvexSobolev(p) => (u.clone(), p),
        _ => return None,
    };
    let t = heatflow::auto_horizon(&v, p).ok()?;
    heatflow::remainder_r(&v, p, t, 0.01).ok().map(|r| r.value)
}

/// A random admissible starting field for `spec`.
pub fn random_admissible(spec: &QuotientSpec, rng: &mut SplitMix64) -> Result<Field> {
    let g = &spec.grid;
    let series = FourierSeries::random(rng, g.length(), default_max_mode(g), 1.0, 0.7);
    let s = series.sample(g);
    let peak = s.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    match spec.kind {
        QuotientKind::Poincare(_) => Ok(Field::generic(g, s)?.project_mean_zero()),
        QuotientKind::LogSobolev(_) => Field::generic(g, s.iter().map(|x| 1.0 + 0.5 * x / peak).collect()),
        QuotientKind::ConvexSobolev(_) => Field::density(g, s.iter().map(|x| (0.5 * x / peak).exp()).collect()),
    }
}

/// Minimize from `starts` random fields seeded `seed, seed + 1, ...`, one
/// thread per start, and keep the smallest value (ties go to the lower seed).
pub fn minimize_multistart(
    spec: &QuotientSpec,
    seed: u64,
    starts: usize,
    opts: MinimizeOptions,
) -> Result<QuotientResult> {
    let starts = starts.max(1);
    let results: Vec<Result<QuotientResult>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..starts as u64)
            .map(|i| {
                scope.spawn(move || {
                    let s = seed.wrapping_add(i);
                    let init = random_admissible(spec, &mut SplitMix64::new(s))?;
                    let mut r = minimize_with(spec, &init, opts)?;
                    r.seed = Some(s);
                    Ok(r)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("minimizer thread panicked"))
            .collect()
    });
    let mut first_err = None;
    let mut best: Option<QuotientResult> = None;
    for r in results {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.value.total_cmp(&b.value).is_lt()) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one start"))
}
