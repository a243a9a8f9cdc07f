//! Entropy-production argument along the heat flow.
//!
//! `v` solves `v_t = v_xx` and is advanced exactly in Fourier space; `w = v^(p/2)`
//! then solves `w_t = w_xx + (2/p - 1) w_x^2 / w`. Along the flow
//! `f(t) = int w_x^2 - (2 pi^2 p / L^2) int sigma(v)` decreases with
//! `-f' = 2 int (w_xx^2 - (4 pi^2 / L^2) w_x^2 + (2/p - 1) w_x^4 / (3 w^2))`.
//! For `p = 1`, `sigma(v) = v log(v / mean v)`; otherwise
//! `sigma(v) = (v^p - mean(v)^p) / (p - 1)`.

use crate::error::{Error, Result};
use crate::grid::{DiffBackend, Field, PeriodicGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `v` below this fraction of `max v(0)` counts as a loss of positivity.
const FLOOR: f64 = 1e-12;

/// Pointwise dissipation below which the flow is considered settled.
const SETTLED: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatFlowRecord {
    pub t: f64,
    pub f_value: f64,
    /// `-f'(t)`.
    pub dissipation: f64,
    #[serde(skip)]
    pub w_snapshot: Option<Field>,
}

/// Snapshot `w(t)` together with the quantities the flow tracks.
struct State {
    w: Vec<f64>,
    wx: Vec<f64>,
    wxx: Vec<f64>,
    v: Vec<f64>,
}

/// Heat flow started from a positive `v(0)`, evaluated exactly at any time.
#[derive(Debug, Clone)]
pub struct HeatFlow {
    grid: PeriodicGrid,
    p: f64,
    v0_hat: Vec<Complex64>,
    vbar: f64,
    floor: f64,
}

impl HeatFlow {
    pub fn new(v0: &Field, p: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&p) {
            return Err(Error::InvalidQuotient(format!("exponent p = {p} must lie in [1, 2]")));
        }
        if let Some((index, &value)) = v0.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::NonPositiveDensity { index, value });
        }
        let grid = v0.grid().clone();
        Ok(Self {
            p,
            v0_hat: grid.forward(v0.values()),
            vbar: v0.mean(),
            floor: FLOOR * v0.max(),
            grid,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// `v(t)`.
    pub fn density(&self, t: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        let spec = self
            .v0_hat
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let kappa = g.base_wavenumber() * g.mode(idx) as f64;
                z * (-kappa * kappa * t).exp()
            })
            .collect();
        let v = g.inverse(spec);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > self.floor) {
            return Err(Error::PositivityLost { t, min });
        }
        Ok(v)
    }

    fn state(&self, t: f64) -> Result<State> {
        let v = self.density(t)?;
        let w: Vec<f64> = v.iter().map(|x| x.powf(self.p / 2.0)).collect();
        let wx = self.grid.diff(&w, 1, DiffBackend::Spectral);
        let wxx = self.grid.diff(&w, 2, DiffBackend::Spectral);
        Ok(State { w, wx, wxx, v })
    }

    fn sigma_integral(&self, v: &[f64]) -> f64 {
        let h = self.grid.spacing();
        let p = self.p;
        if p == 1.0 {
            h * v.iter().map(|x| x * (x / self.vbar).ln()).sum::<f64>()
        } else {
            let vb = self.vbar.powf(p);
            h * v.iter().map(|x| (x.powf(p) - vb) / (p - 1.0)).sum::<f64>()
        }
    }

    fn integrand(&self, s: &State) -> Vec<f64> {
        let c = 4.0 * PI * PI / self.grid.length().powi(2);
        let q = 2.0 / self.p - 1.0;
        (0..s.w.len())
            .map(|j| {
                let (w, wx, wxx) = (s.w[j], s.wx[j], s.wxx[j]);
                2.0 * (wxx * wxx - c * wx * wx + q * wx.powi(4) / (3.0 * w * w))
            })
            .collect()
    }

    fn f_of(&self, s: &State) -> f64 {
        let h = self.grid.spacing();
        let l = self.grid.length();
        h * s.wx.iter().map(|x| x * x).sum::<f64>() - 2.0 * PI * PI * self.p / (l * l) * self.sigma_integral(&s.v)
    }

    /// `f(t)`.
    pub fn f(&self, t: f64) -> Result<f64> {
        Ok(self.f_of(&self.state(t)?))
    }

    /// `-f'(t)`.
    pub fn dissipation(&self, t: f64) -> Result<f64> {
        let s = self.state(t)?;
        Ok(self.grid.spacing() * self.integrand(&s).iter().sum::<f64>())
    }

    /// Sup-norm of the pointwise dissipation density at time `t`.
    pub fn dissipation_sup(&self, t: f64) -> Result<f64> {
        let s = self.state(t)?;
        Ok(self.integrand(&s).iter().fold(0.0, |m, x| m.max(x.abs())))
    }

    /// `int sigma(v(t))`.
    pub fn entropy(&self, t: f64) -> Result<f64> {
        Ok(self.sigma_integral(&self.density(t)?))
    }

    /// `int w_x(t)^2`.
    pub fn fisher(&self, t: f64) -> Result<f64> {
        let s = self.state(t)?;
        Ok(self.grid.spacing() * s.wx.iter().map(|x| x * x).sum::<f64>())
    }

    fn record(&self, t: f64, snapshot: bool) -> Result<HeatFlowRecord> {
        let s = self.state(t)?;
        let dissipation = self.grid.spacing() * self.integrand(&s).iter().sum::<f64>();
        let f_value = self.f_of(&s);
        let w_snapshot = if snapshot {
            Some(Field::density(&self.grid, s.w)?)
        } else {
            None
        };
        Ok(HeatFlowRecord {
            t,
            f_value,
            dissipation,
            w_snapshot,
        })
    }
}

fn check_times(t_end: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "final time must be nonnegative, got {t_end}"
        )));
    }
    Ok(())
}

/// Records of the flow started from `v(0) = u^(2/p)`, so that `w(0) = u`,
/// at `t = 0, dt, 2dt, ...` and at `t_end`. Every `snapshot_every`-th record
/// carries `w`.
pub fn heatflow_records(
    u: &Field,
    p: f64,
    t_end: f64,
    dt: f64,
    snapshot_every: Option<usize>,
) -> Result<Vec<HeatFlowRecord>> {
    check_times(t_end, dt)?;
    let v0 = u.map(|x| x.powf(2.0 / p))?;
    if let Some((index, &value)) = u.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveDensity { index, value });
    }
    let flow = HeatFlow::new(&v0, p)?;
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    (0..=steps)
        .map(|k| {
            let t = if k == steps { t_end } else { k as f64 * dt };
            let snap = snapshot_every.is_some_and(|e| e > 0 && k % e == 0);
            flow.record(t, snap)
        })
        .collect()
}

pub fn heatflow_verify(u: &Field, p: f64, t_end: f64, dt: f64) -> Result<Vec<HeatFlowRecord>> {
    heatflow_records(u, p, t_end, dt, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    /// `int_0^horizon -f'(t) dt`.
    pub value: f64,
    /// Estimated contribution of `(horizon, infinity)` from the observed decay rate.
    pub tail_estimate: f64,
    pub horizon: f64,
    pub f0: f64,
    pub f_horizon: f64,
}

impl Remainder {
    /// `value + tail_estimate`.
    pub fn total(&self) -> f64 {
        self.value + self.tail_estimate
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

const PANEL_NODES: usize = 8;

/// Time integral over `[0, horizon]` of the dissipation along the flow with
/// `v(0) = v0` (so `w(0) = v0^(p/2)`), by composite Gauss-Legendre quadrature
/// on panels of width `dt`.
pub fn remainder_r(v0: &Field, p: f64, horizon: f64, dt: f64) -> Result<Remainder> {
    check_times(horizon, dt)?;
    let flow = HeatFlow::new(v0, p)?;
    let rule = gauss_legendre(PANEL_NODES);
    let panels = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let mut value = 0.0;
    for k in 0..panels {
        let a = k as f64 * dt;
        let b = if k + 1 == panels { horizon } else { a + dt };
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        for &(x, w) in &rule {
            value += half * w * flow.dissipation(mid + half * x)?;
        }
    }
    let d_end = flow.dissipation(horizon)?;
    // exponential extrapolation while the decay is visible, a one-panel
    // bound once the dissipation has sunk into roundoff
    let tail_estimate = if horizon > dt {
        let d_prev = flow.dissipation(horizon - dt)?;
        if d_end > 0.0 && d_prev > 1.001 * d_end {
            d_end * dt / (d_prev / d_end).ln()
        } else {
            d_end.abs() * dt
        }
    } else {
        0.0
    };
    Ok(Remainder {
        value,
        tail_estimate,
        horizon,
        f0: flow.f(0.0)?,
        f_horizon: flow.f(horizon)?,
    })
}

/// Smallest `t` in `{0, 1, 2, 4, ...}`, capped at `10^4`, at which the
/// pointwise dissipation is below `1e-12` everywhere.
pub fn auto_horizon(v0: &Field, p: f64) -> Result<f64> {
    let flow = HeatFlow::new(v0, p)?;
    if flow.dissipation_sup(0.0)? < SETTLED {
        return Ok(0.0);
    }
    let mut t = 1.0;
    while t < 1e4 && flow.dissipation_sup(t)? >= SETTLED {
        t *= 2.0;
    }
    Ok(t.min(1e4))
}
