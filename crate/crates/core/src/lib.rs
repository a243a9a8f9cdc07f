//! Numerical laboratory for the periodic DLSS equation
//! `u_t + (u (log u)_xx)_xx = 0` on the torus of length `L`.
//!
//! - [`grid`]: periodic grid, spectral and finite-difference calculus
//! - [`functionals`]: entropies, Lyapunov functionals, entropy production
//! - [`solver`]: implicit Euler in `y = log u` solved by Newton iteration
//! - [`inequalities`]: Poincaré, logarithmic Sobolev and convex Sobolev
//!   quotients, their minimization and the heat-flow verification
//! - [`decay`], [`identity`], [`config`], [`io`]: driver plumbing

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod decay;
pub mod error;
pub mod fft;
pub mod functionals;
pub mod grid;
pub mod identity;
pub mod inequalities;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{DiffBackend, FdOrder, Field, FieldKind, PeriodicGrid};
pub use solver::{SolverConfig, Trajectory};

/// Entropy decay rate `32 pi^4 / L^4` of the DLSS flow.
pub fn entropy_decay_rate(length: f64) -> f64 {
    32.0 * std::f64::consts::PI.powi(4) / length.powi(4)
}
