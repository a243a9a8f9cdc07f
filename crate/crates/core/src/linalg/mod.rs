//! Direct linear solvers for the Newton systems.

mod banded;
mod dense;

pub use banded::{BandLu, CyclicBandedLu};
pub use dense::DenseLu;
