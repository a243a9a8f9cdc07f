//! Implicit Euler in the log variable `y = log u`.
//!
//! Each step solves
//!
//! ```text
//! (e^y - e^{y_prev}) / tau + D2(e^y D2 y) - eps D2 y + eps y = 0
//! ```
//!
//! for `y` by damped Newton iteration, where `D2` is the backend's second
//! derivative. Densities are recovered as `e^y`, so every emitted state is
//! strictly positive.
//!
//! Convergence is measured in density-increment units: the residual sup-norm
//! times `tau`, i.e. `max |e^y - e^{y_prev} + tau (...)|`. An iteration also
//! stops once the Newton correction itself falls below the tolerance, which
//! is what terminates the iteration when the residual sits at its roundoff
//! floor (the fourth derivative amplifies rounding by `(N/2)^4`).

use crate::error::{Error, Result};
use crate::functionals::{entropy_production, entropy_relative, lyapunov_u_minus_logu};
use crate::grid::{DiffBackend, Field, FieldKind, PeriodicGrid};
use crate::linalg::{CyclicBandedLu, DenseLu};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearSolver {
    Dense,
    /// Periodic band solver; finite-difference backends only.
    Banded,
}

impl FromStr for LinearSolver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Ok(LinearSolver::Dense),
            "banded" => Ok(LinearSolver::Banded),
            other => Err(format!("unknown linear solver `{other}` (expected dense or banded)")),
        }
    }
}

/// When the Newton Jacobian is re-assembled and re-factored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JacobianUpdate {
    /// Exact Newton: a fresh Jacobian at every iterate.
    EveryIteration,
    /// Keep the last factorization across iterations and time steps; refresh
    /// when the observed residual contraction ratio exceeds the threshold or
    /// a line search fails with a stale Jacobian.
    Lagged { max_contraction: f64 },
}

impl JacobianUpdate {
    pub const LAGGED: JacobianUpdate = JacobianUpdate::Lagged { max_contraction: 0.1 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau: f64,
    pub epsilon: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Initial fraction of the Newton step tried before halving.
    pub damping: f64,
    pub backend: DiffBackend,
    pub linear_solver: LinearSolver,
    pub jacobian: JacobianUpdate,
    /// Rescale `e^y` after each step to restore the previous mass (only
    /// meaningful when `epsilon > 0`).
    pub renormalize_mass: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 1e-4,
            epsilon: 0.0,
            newton_tol: 1e-10,
            max_newton: 30,
            damping: 1.0,
            backend: DiffBackend::Spectral,
            linear_solver: LinearSolver::Dense,
            jacobian: JacobianUpdate::LAGGED,
            renormalize_mass: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if self.max_newton == 0 {
            return bad("max_newton must be at least 1".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.linear_solver == LinearSolver::Banded && self.backend == DiffBackend::Spectral {
            return bad("the banded linear solver requires a finite-difference backend".into());
        }
        if let JacobianUpdate::Lagged { max_contraction } = self.jacobian {
            if !(max_contraction > 0.0 && max_contraction < 1.0) {
                return bad(format!("max_contraction must lie in (0, 1), got {max_contraction}"));
            }
        }
        Ok(())
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Discrete operators of the scheme on one grid.
struct Scheme {
    grid: PeriodicGrid,
    backend: DiffBackend,
    epsilon: f64,
    d2_matrix: Option<Vec<f64>>,
    /// Bound on the sup-norm of the discrete second derivative.
    d2_norm: f64,
}

struct ResidualEval {
    residual: Vec<f64>,
    u: Vec<f64>,
    d2y: Vec<f64>,
    /// Estimated rounding level of `tau * |residual|`.
    floor: f64,
}

/// Safety factor on the rounding-level estimate of the residual.
const FLOOR_FACTOR: f64 = 10.0;

impl Scheme {
    fn new(grid: &PeriodicGrid, cfg: &SolverConfig) -> Self {
        let mut unit = vec![0.0; grid.len()];
        unit[0] = 1.0;
        let d2_norm = grid.diff(&unit, 2, cfg.backend).iter().map(|c| c.abs()).sum();
        Self {
            grid: grid.clone(),
            backend: cfg.backend,
            epsilon: cfg.epsilon,
            d2_matrix: None,
            d2_norm,
        }
    }

    fn d2(&self, v: &[f64]) -> Vec<f64> {
        self.grid.diff(v, 2, self.backend)
    }

    fn residual(&self, y: &[f64], u_prev: &[f64], tau: f64) -> ResidualEval {
        let u: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let d2y = self.d2(y);
        let flux: Vec<f64> = u.iter().zip(&d2y).map(|(a, b)| a * b).collect();
        let d2flux = self.d2(&flux);
        let eps = self.epsilon;
        let residual = (0..y.len())
            .map(|i| (u[i] - u_prev[i]) / tau + d2flux[i] - eps * d2y[i] + eps * y[i])
            .collect();
        // the fourth-order term amplifies rounding in y by |D2|^2
        let (umax, ymax) = (sup_norm(&u), sup_norm(y).max(1.0));
        let floor = FLOOR_FACTOR
            * f64::EPSILON
            * (umax + tau * (self.d2_norm * self.d2_norm * umax * ymax + eps * (self.d2_norm + 1.0) * ymax));
        ResidualEval {
            residual,
            u,
            d2y,
            floor,
        }
    }

    /// Exact Jacobian of the discrete residual, dense row-major:
    /// `diag(u)/tau + D2 (diag(u) D2 + diag(u D2y)) - eps D2 + eps I`.
    fn jacobian(&mut self, eval: &ResidualEval, tau: f64) -> Vec<f64> {
        let n = self.grid.len();
        let d2 = self
            .d2_matrix
            .get_or_insert_with(|| self.grid.second_derivative_matrix(self.backend));
        let mut inner = vec![0.0; n * n];
        for l in 0..n {
            let row = &mut inner[l * n..(l + 1) * n];
            for (dst, &src) in row.iter_mut().zip(&d2[l * n..(l + 1) * n]) {
                *dst = eval.u[l] * src;
            }
            row[l] += eval.u[l] * eval.d2y[l];
        }
        let mut jac = vec![0.0; n * n];
        for i in 0..n {
            let out = &mut jac[i * n..(i + 1) * n];
            for l in 0..n {
                let c = d2[i * n + l];
                if c != 0.0 {
                    for (o, &b) in out.iter_mut().zip(&inner[l * n..(l + 1) * n]) {
                        *o += c * b;
                    }
                }
            }
            for j in 0..n {
                out[j] -= self.epsilon * d2[i * n + j];
            }
            out[i] += eval.u[i] / tau + self.epsilon;
        }
        jac
    }
}

enum Factorization {
    Dense(DenseLu),
    Banded(CyclicBandedLu),
}

impl Factorization {
    fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            Factorization::Dense(lu) => lu.solve_in_place(b),
            Factorization::Banded(lu) => lu.solve_in_place(b),
        }
    }
}

/// Counters accumulated by a [`Stepper`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepperStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub factorizations: usize,
    pub residual_evaluations: usize,
    pub tau_halvings: usize,
}

/// Result of one converged implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub y: Vec<f64>,
    pub iterations: usize,
    /// Final residual in density-increment units (`tau * sup |F|`).
    pub residual: f64,
}

/// Stateful time stepper. Holds the cached Jacobian factorization used by
/// [`JacobianUpdate::Lagged`].
pub struct Stepper {
    cfg: SolverConfig,
    scheme: Scheme,
    cached: Option<(f64, Factorization)>,
    stats: StepperStats,
}

const MAX_HALVINGS: usize = 40;
const MAX_TAU_HALVINGS: usize = 5;

impl Stepper {
    pub fn new(grid: &PeriodicGrid, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            scheme: Scheme::new(grid, &cfg),
            cfg,
            cached: None,
            stats: StepperStats::default(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn stats(&self) -> StepperStats {
        self.stats
    }

    fn factor(&mut self, eval: &ResidualEval, tau: f64) -> Result<()> {
        let n = self.scheme.grid.len();
        let jac = self.scheme.jacobian(eval, tau);
        let fact = match self.cfg.linear_solver {
            LinearSolver::Dense => Factorization::Dense(DenseLu::factor(n, jac)?),
            LinearSolver::Banded => {
                let p = match self.cfg.backend {
                    DiffBackend::FiniteDifference(order) => 2 * order.half_width(),
                    DiffBackend::Spectral => unreachable!("rejected by validate"),
                };
                Factorization::Banded(CyclicBandedLu::factor(n, p, |i, j| jac[i * n + j])?)
            }
        };
        self.stats.factorizations += 1;
        self.cached = Some((tau, fact));
        Ok(())
    }

    fn eval(&mut self, y: &[f64], u_prev: &[f64], tau: f64) -> (ResidualEval, f64) {
        self.stats.residual_evaluations += 1;
        let eval = self.scheme.residual(y, u_prev, tau);
        let norm = tau * sup_norm(&eval.residual);
        (eval, if norm.is_finite() { norm } else { f64::INFINITY })
    }

    /// One implicit step of size `tau` from `y_prev`, without step-size fallback.
    pub fn step_with_tau(&mut self, y_prev: &[f64], tau: f64) -> Result<StepOutcome> {
        let tol = self.cfg.newton_tol;
        let u_prev: Vec<f64> = y_prev.iter().map(|v| v.exp()).collect();
        if self.cached.as_ref().is_some_and(|(t, _)| (t - tau).abs() > 1e-12 * tau) {
            self.cached = None;
        }
        let mut y = y_prev.to_vec();
        let (mut eval, mut norm) = self.eval(&y, &u_prev, tau);
        let mut iterations = 0;
        // Jacobian was assembled at the current iterate
        let mut fresh = false;
        let mut refresh = false;
        while norm > tol {
            if iterations >= self.cfg.max_newton {
                return Err(Error::NoConvergence {
                    step: 0,
                    iterations,
                    residual: norm,
                });
            }
            iterations += 1;
            if self.cached.is_none() || refresh || self.cfg.jacobian == JacobianUpdate::EveryIteration {
                self.factor(&eval, tau)?;
                fresh = true;
                refresh = false;
            }
            let mut delta: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
            self.cached
                .as_ref()
                .expect("factorized above")
                .1
                .solve_in_place(&mut delta);
            let dnorm = sup_norm(&delta);
            if dnorm <= tol {
                for (yi, d) in y.iter_mut().zip(&delta) {
                    *yi += d;
                }
                let (_, n) = self.eval(&y, &u_prev, tau);
                norm = n;
                break;
            }
            let mut lambda = self.cfg.damping;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
                let (e, n) = self.eval(&trial, &u_prev, tau);
                if n < norm {
                    accepted = Some((trial, e, n));
                    break;
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((trial, e, n)) => {
                    if let JacobianUpdate::Lagged { max_contraction } = self.cfg.jacobian {
                        refresh = n > max_contraction * norm && n > e.floor;
                    }
                    y = trial;
                    eval = e;
                    norm = n;
                    fresh = false;
                    if lambda * dnorm <= tol {
                        break;
                    }
                }
                None if !fresh => {
                    refresh = true;
                }
                // no descent along an exact Newton direction: rounding noise dominates
                None if norm <= eval.floor => break,
                None => {
                    return Err(Error::NoConvergence {
                        step: 0,
                        iterations,
                        residual: norm,
                    });
                }
            }
        }
        self.stats.newton_iterations += iterations;
        self.stats.steps += 1;
        if self.cfg.renormalize_mass && self.cfg.epsilon > 0.0 {
            let before: f64 = u_prev.iter().sum();
            let after: f64 = y.iter().map(|v| v.exp()).sum();
            let shift = (before / after).ln();
            for v in y.iter_mut() {
                *v += shift;
            }
        }
        Ok(StepOutcome {
            y,
            iterations,
            residual: norm,
        })
    }

    /// Step of size `tau`; on Newton failure the interval is covered by two
    /// half steps, recursively, at most five halvings deep.
    pub fn step_adaptive(&mut self, y_prev: &[f64], tau: f64) -> Result<StepOutcome> {
        self.step_halving(y_prev, tau, 0)
    }

    fn step_halving(&mut self, y_prev: &[f64], tau: f64, depth: usize) -> Result<StepOutcome> {
        match self.step_with_tau(y_prev, tau) {
            Ok(out) => Ok(out),
            Err(Error::NoConvergence { .. } | Error::SingularJacobian { .. }) if depth < MAX_TAU_HALVINGS => {
                self.stats.tau_halvings += 1;
                let first = self.step_halving(y_prev, 0.5 * tau, depth + 1)?;
                let second = self.step_halving(&first.y, 0.5 * tau, depth + 1)?;
                Ok(StepOutcome {
                    y: second.y,
                    iterations: first.iterations.max(second.iterations),
                    residual: second.residual,
                })
            }
            Err(e) => Err(e),
        }
    }
}

/// Residual of the implicit step at `y` given the previous state `y_prev`.
pub fn residual(y: &Field, y_prev: &Field, cfg: &SolverConfig) -> Result<Field> {
    if y.grid() != y_prev.grid() {
        return Err(Error::GridMismatch);
    }
    let scheme = Scheme::new(y.grid(), cfg);
    let u_prev: Vec<f64> = y_prev.values().iter().map(|v| v.exp()).collect();
    Field::generic(y.grid(), scheme.residual(y.values(), &u_prev, cfg.tau).residual)
}

/// Residual norm used for convergence: `tau * sup |F|`.
pub fn residual_norm(residual: &Field, cfg: &SolverConfig) -> f64 {
    cfg.tau * sup_norm(residual.values())
}

/// A single exact Newton update (fresh Jacobian, backtracking on the
/// residual norm). Returns the new iterate and its residual norm.
pub fn newton_step(y: &Field, y_prev: &Field, cfg: &SolverConfig) -> Result<(Field, f64)> {
    if y.grid() != y_prev.grid() {
        return Err(Error::GridMismatch);
    }
    cfg.validate()?;
    let tau = cfg.tau;
    let mut scheme = Scheme::new(y.grid(), cfg);
    let u_prev: Vec<f64> = y_prev.values().iter().map(|v| v.exp()).collect();
    let eval = scheme.residual(y.values(), &u_prev, tau);
    let norm = tau * sup_norm(&eval.residual);
    let n = y.len();
    let jac = scheme.jacobian(&eval, tau);
    let mut delta: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
    match (cfg.linear_solver, cfg.backend) {
        (LinearSolver::Banded, DiffBackend::FiniteDifference(order)) => {
            CyclicBandedLu::factor(n, 2 * order.half_width(), |i, j| jac[i * n + j])?.solve_in_place(&mut delta)
        }
        _ => DenseLu::factor(n, jac)?.solve_in_place(&mut delta),
    }
    let mut lambda = cfg.damping;
    for _ in 0..=MAX_HALVINGS {
        let trial: Vec<f64> = y.values().iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
        let r = scheme.residual(&trial, &u_prev, tau);
        let trial_norm = tau * sup_norm(&r.residual);
        if trial_norm < norm || sup_norm(&delta) * lambda <= cfg.newton_tol {
            return Ok((Field::log_density(y.grid(), trial)?, trial_norm));
        }
        lambda *= 0.5;
    }
    Ok((y.clone(), norm))
}

/// One implicit step from `y_prev` (with the step-halving fallback).
pub fn step(y_prev: &Field, cfg: &SolverConfig) -> Result<Field> {
    let mut stepper = Stepper::new(y_prev.grid(), *cfg)?;
    let out = stepper.step_adaptive(y_prev.values(), cfg.tau)?;
    Field::log_density(y_prev.grid(), out.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub mass: f64,
    /// `int u log(u / u_bar)` with `u_bar` the mean of the initial datum.
    pub entropy_rel: f64,
    /// `int (u - log u)`
    pub lyap: f64,
    pub production: f64,
    pub min_u: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: PeriodicGrid,
    pub config: SolverConfig,
    pub records: Vec<TimeSeriesRecord>,
    pub final_y: Field,
    pub snapshots: Option<Vec<(f64, Field)>>,
    /// Nodes raised to the positivity floor when taking `log u0`.
    pub clamped_nodes: usize,
    pub stats: StepperStats,
}

/// Checks that `values` never increases by more than `slack_per_step` times
/// the number of time steps separating consecutive records.
pub fn non_increasing_within(
    records: &[TimeSeriesRecord],
    tau: f64,
    slack_per_step: f64,
    value: impl Fn(&TimeSeriesRecord) -> f64,
) -> bool {
    records.windows(2).all(|w| {
        let steps = ((w[1].t - w[0].t).abs() / tau).round().max(1.0);
        value(&w[1]) <= value(&w[0]) + slack_per_step * steps
    })
}

impl Trajectory {
    /// `int (u - log u)` is non-increasing along the records, within
    /// `10 * newton_tol` per step.
    pub fn lyapunov_check(&self) -> bool {
        non_increasing_within(&self.records, self.config.tau, 10.0 * self.config.newton_tol, |r| {
            r.lyap
        })
    }

    /// Same test for the relative entropy.
    pub fn entropy_check(&self) -> bool {
        non_increasing_within(&self.records, self.config.tau, 10.0 * self.config.newton_tol, |r| {
            r.entropy_rel
        })
    }

    pub fn final_density(&self) -> Result<Field> {
        self.final_y.exp()
    }

    pub fn max_relative_mass_drift(&self) -> f64 {
        let m0 = self.records[0].mass;
        self.records
            .iter()
            .map(|r| ((r.mass - m0) / m0).abs())
            .fold(0.0, f64::max)
    }
}

/// Optional extras for [`solve_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub record_every: usize,
    pub snapshot_every: Option<usize>,
}

/// Clamps `u0` below at `1e-12 * max(u0)` and takes the logarithm.
pub fn initial_log_density(u0: &Field) -> Result<(Field, usize)> {
    let max = u0.max();
    if !(max > 0.0) {
        return Err(Error::NonPositiveDensity { index: 0, value: max });
    }
    let floor = 1e-12 * max;
    let mut clamped = 0;
    let y = u0
        .values()
        .iter()
        .map(|&v| {
            if v < floor {
                clamped += 1;
                floor.ln()
            } else {
                v.ln()
            }
        })
        .collect();
    Ok((Field::log_density(u0.grid(), y)?, clamped))
}

fn make_record(
    grid: &PeriodicGrid,
    y: &[f64],
    t: f64,
    u_bar: f64,
    backend: DiffBackend,
    newton_iters: usize,
) -> Result<TimeSeriesRecord> {
    let u = Field::new(grid, y.iter().map(|v| v.exp()).collect(), FieldKind::Density)?;
    Ok(TimeSeriesRecord {
        t,
        mass: u.integrate(),
        entropy_rel: entropy_relative(&u, u_bar)?,
        lyap: lyapunov_u_minus_logu(&u)?,
        production: entropy_production(&u, backend)?,
        min_u: u.min(),
        newton_iters,
    })
}

/// Integrates from `u0` to time `t_end`, recording every `record_every` steps
/// (and always at the initial and final times).
pub fn solve(u0: &Field, t_end: f64, cfg: &SolverConfig, record_every: usize) -> Result<Trajectory> {
    solve_with(
        u0,
        t_end,
        cfg,
        SolveOptions {
            record_every,
            snapshot_every: None,
        },
    )
}

pub fn solve_with(u0: &Field, t_end: f64, cfg: &SolverConfig, opts: SolveOptions) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "final time must be positive, got {t_end}"
        )));
    }
    let grid = u0.grid().clone();
    let (y0, clamped_nodes) = initial_log_density(u0)?;
    let u_bar = y0.values().iter().map(|v| v.exp()).sum::<f64>() / grid.len() as f64;
    let mut stepper = Stepper::new(&grid, *cfg)?;
    let record_every = opts.record_every.max(1);

    let n_steps = ((t_end / cfg.tau) - 1e-9).ceil().max(1.0) as usize;
    let mut records = vec![make_record(&grid, y0.values(), 0.0, u_bar, cfg.backend, 0)?];
    let mut snapshots = match opts.snapshot_every {
        Some(_) => Some(vec![(0.0, y0.exp()?)]),
        None => None,
    };
    let mut y = y0.into_values();
    let mut t = 0.0;
    for k in 1..=n_steps {
        let (t_next, dt) = if k == n_steps {
            (t_end, t_end - t)
        } else {
            (k as f64 * cfg.tau, cfg.tau)
        };
        let out = stepper.step_adaptive(&y, dt).map_err(|e| match e {
            Error::NoConvergence {
                iterations, residual, ..
            } => Error::NoConvergence {
                step: k,
                iterations,
                residual,
            },
            other => other,
        })?;
        y = out.y;
        t = t_next;
        if k % record_every == 0 || k == n_steps {
            records.push(make_record(&grid, &y, t, u_bar, cfg.backend, out.iterations)?);
        }
        if let (Some(snaps), Some(every)) = (snapshots.as_mut(), opts.snapshot_every) {
            if k % every.max(1) == 0 || k == n_steps {
                snaps.push((t, Field::density(&grid, y.iter().map(|v| v.exp()).collect())?));
            }
        }
    }
    Ok(Trajectory {
        final_y: Field::log_density(&grid, y)?,
        grid,
        config: *cfg,
        records,
        snapshots,
        clamped_nodes,
        stats: stepper.stats(),
    })
}
