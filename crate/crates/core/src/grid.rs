//! Uniform periodic grid on the torus [0, L) and the calculus on it.
//!
//! Derivatives come from one of two interchangeable backends: Fourier
//! collocation ([`DiffBackend::Spectral`]) or periodic central finite
//! differences of order two or four. Quadrature is the rectangle rule
//! `h * sum(values)`, which is spectrally accurate for smooth periodic data.

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Accuracy order of the central finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FdOrder {
    Second,
    Fourth,
}

impl FdOrder {
    pub fn order(self) -> usize {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
        }
    }

    /// Points on each side of the centre used by the stencils.
    pub fn half_width(self) -> usize {
        self.order() / 2
    }

    /// Second-derivative stencil `c[-w..=w]`, to be divided by h^2.
    fn second_stencil(self) -> &'static [f64] {
        match self {
            FdOrder::Second => &[1.0, -2.0, 1.0],
            FdOrder::Fourth => &[-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0],
        }
    }

    /// First-derivative stencil `c[-w..=w]`, to be divided by h.
    fn first_stencil(self) -> &'static [f64] {
        match self {
            FdOrder::Second => &[-0.5, 0.0, 0.5],
            FdOrder::Fourth => &[1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffBackend {
    Spectral,
    FiniteDifference(FdOrder),
}

impl DiffBackend {
    pub const FD2: DiffBackend = DiffBackend::FiniteDifference(FdOrder::Second);
    pub const FD4: DiffBackend = DiffBackend::FiniteDifference(FdOrder::Fourth);

    pub fn name(self) -> &'static str {
        match self {
            DiffBackend::Spectral => "spectral",
            DiffBackend::FiniteDifference(FdOrder::Second) => "fd2",
            DiffBackend::FiniteDifference(FdOrder::Fourth) => "fd4",
        }
    }
}

impl fmt::Display for DiffBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DiffBackend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spectral" => Ok(DiffBackend::Spectral),
            "fd2" | "finite_difference_2" => Ok(DiffBackend::FD2),
            "fd4" | "finite_difference_4" => Ok(DiffBackend::FD4),
            other => Err(format!("unknown backend `{other}` (expected spectral, fd2 or fd4)")),
        }
    }
}

/// The discretized torus of length `L` with `N` equispaced nodes `x_j = j h`.
#[derive(Clone)]
pub struct PeriodicGrid {
    length: f64,
    n: usize,
    spacing: f64,
    plan: Arc<FftPlan>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("length", &self.length)
            .field("n", &self.n)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl PeriodicGrid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidLength(length));
        }
        if n % 2 == 1 {
            return Err(Error::OddN(n));
        }
        if n < 8 {
            return Err(Error::TooFewPoints(n));
        }
        Ok(Self {
            length,
            n,
            spacing: length / n as f64,
            plan: Arc::new(FftPlan::new(n)),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Fundamental wavenumber 2 pi / L.
    pub fn base_wavenumber(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Signed mode number of DFT index `idx` (Nyquist reported as +N/2).
    pub fn mode(&self, idx: usize) -> i64 {
        if idx <= self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        idx == self.n / 2
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|j| f(self.node(j))).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        self.spacing * values.iter().sum::<f64>()
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        self.integrate(values) / self.length
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        self.plan.forward_real(values)
    }

    pub fn inverse(&self, spectrum: Vec<Complex64>) -> Vec<f64> {
        self.plan.inverse_real(spectrum)
    }

    /// Fourier symbol of d^k/dx^k at DFT index `idx`; the Nyquist mode is zeroed for odd k.
    pub fn derivative_symbol(&self, idx: usize, k: u32) -> Complex64 {
        if self.is_nyquist(idx) && k % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        let kappa = self.base_wavenumber() * self.mode(idx) as f64;
        Complex64::new(0.0, kappa).powu(k)
    }

    /// k-th periodic derivative of raw nodal values. Panics if `k == 0`.
    pub fn diff(&self, values: &[f64], k: u32, backend: DiffBackend) -> Vec<f64> {
        assert!(k >= 1, "derivative order must be >= 1");
        assert_eq!(values.len(), self.n, "value length does not match grid");
        match backend {
            DiffBackend::Spectral => {
                let mut spec = self.forward(values);
                for (idx, z) in spec.iter_mut().enumerate() {
                    *z *= self.derivative_symbol(idx, k);
                }
                self.inverse(spec)
            }
            DiffBackend::FiniteDifference(order) => {
                let mut out = values.to_vec();
                for _ in 0..k / 2 {
                    out = self.apply_stencil(&out, order.second_stencil(), self.spacing * self.spacing);
                }
                if k % 2 == 1 {
                    out = self.apply_stencil(&out, order.first_stencil(), self.spacing);
                }
                out
            }
        }
    }

    fn apply_stencil(&self, values: &[f64], stencil: &[f64], scale: f64) -> Vec<f64> {
        let n = self.n;
        let w = stencil.len() / 2;
        (0..n)
            .map(|j| {
                stencil
                    .iter()
                    .enumerate()
                    .map(|(s, &c)| c * values[(j + n + s - w) % n])
                    .sum::<f64>()
                    / scale
            })
            .collect()
    }

    /// Dense row-major matrix of the backend's second-derivative operator.
    ///
    /// Both backends are circulant, so only the first column is computed.
    pub fn second_derivative_matrix(&self, backend: DiffBackend) -> Vec<f64> {
        let n = self.n;
        let mut unit = vec![0.0; n];
        unit[0] = 1.0;
        let mut col = self.diff(&unit, 2, backend);
        if let DiffBackend::FiniteDifference(order) = backend {
            // exact zeros outside the stencil keep the banded path clean
            let w = order.half_width();
            for (i, c) in col.iter_mut().enumerate() {
                let dist = i.min(n - i);
                if dist > w {
                    *c = 0.0;
                }
            }
        }
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = col[(i + n - j) % n];
            }
        }
        m
    }
}

/// What a grid function represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Density,
    LogDensity,
    Generic,
}

/// A real grid function bound to its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: PeriodicGrid,
    values: Vec<f64>,
    kind: FieldKind,
}

impl Field {
    pub fn new(grid: &PeriodicGrid, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if kind == FieldKind::Density {
            if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(Error::NonPositiveDensity { index, value });
            }
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            kind,
        })
    }

    pub fn generic(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, FieldKind::Generic)
    }

    pub fn density(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, FieldKind::Density)
    }

    pub fn log_density(grid: &PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, FieldKind::LogDensity)
    }

    pub fn from_fn(grid: &PeriodicGrid, kind: FieldKind, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.sample(f), kind)
    }

    pub fn constant(grid: &PeriodicGrid, c: f64, kind: FieldKind) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()], kind)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn derivative(&self, k: u32, backend: DiffBackend) -> Result<Field> {
        if k == 0 {
            return Err(Error::InvalidDerivativeOrder);
        }
        Ok(Field {
            grid: self.grid.clone(),
            values: self.grid.diff(&self.values, k, backend),
            kind: FieldKind::Generic,
        })
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.grid.mean(&self.values)
    }

    pub fn project_mean_zero(&self) -> Field {
        let m = self.mean();
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v - m).collect(),
            kind: FieldKind::Generic,
        }
    }

    /// Pointwise map producing a generic field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::generic(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Field::generic(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// `e^y` of a log-density (or any field) as a density.
    pub fn exp(&self) -> Result<Field> {
        Field::density(&self.grid, self.values.iter().map(|v| v.exp()).collect())
    }

    /// `log u` of a positive field as a log-density.
    pub fn ln(&self) -> Result<Field> {
        if let Some((index, &value)) = self.values.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::NonPositiveDensity { index, value });
        }
        Field::log_density(&self.grid, self.values.iter().map(|v| v.ln()).collect())
    }

    pub fn with_kind(self, kind: FieldKind) -> Result<Field> {
        Field::new(&self.grid, self.values, kind)
    }

    pub fn sup_distance(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
