//! Reproducible random smooth fields.
//!
//! The generator is SplitMix64: the state advances by the golden-ratio
//! increment `0x9E3779B97F4A7C15` and each output is mixed by
//! `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`.
//! Uniform doubles take the top 53 bits. Any implementation following these
//! constants reproduces the same fields for the same seed.

use crate::grid::PeriodicGrid;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// A truncated real Fourier series `sum_m a_m cos(m k x) + b_m sin(m k x)`,
/// defined independently of any grid so it can be sampled at several resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub length: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    /// Random mean-zero series with up to `max_mode` modes. Coefficients are
    /// uniform in `[-1, 1]` times `amplitude * decay^(m-1)`.
    pub fn random(rng: &mut SplitMix64, length: f64, max_mode: usize, amplitude: f64, decay: f64) -> Self {
        let mut cos = Vec::with_capacity(max_mode);
        let mut sin = Vec::with_capacity(max_mode);
        for m in 1..=max_mode {
            let scale = amplitude * decay.powi(m as i32 - 1);
            cos.push(scale * rng.uniform(-1.0, 1.0));
            sin.push(scale * rng.uniform(-1.0, 1.0));
        }
        Self { length, cos, sin }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = std::f64::consts::TAU / self.length;
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (a, b))| {
                let arg = (i + 1) as f64 * k * x;
                a * arg.cos() + b * arg.sin()
            })
            .sum()
    }

    pub fn sample(&self, grid: &PeriodicGrid) -> Vec<f64> {
        grid.sample(|x| self.eval(x))
    }
}

/// Mode cap used for random smooth fields on `grid`.
pub fn default_max_mode(grid: &PeriodicGrid) -> usize {
    (grid.len() / 8).max(1)
}

/// Random smooth positive values `exp(g)` with `g` a random series.
pub fn random_positive(rng: &mut SplitMix64, grid: &PeriodicGrid, amplitude: f64) -> Vec<f64> {
    let series = FourierSeries::random(rng, grid.length(), default_max_mode(grid), amplitude, 0.5);
    series.sample(grid).into_iter().map(f64::exp).collect()
}
