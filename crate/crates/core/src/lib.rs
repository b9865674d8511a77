//! Fisher-information bounds for estimating the deformation β of the
//! commutator `[x, p] = i(1 + βp²)` with a harmonic-oscillator probe.
//!
//! Units are ħ = k_B = 1 throughout.

pub mod error;
pub mod estimation;
pub mod cli;
pub mod hilbert;
pub mod model;
pub mod montecarlo;
pub mod specfun;
pub mod states;

pub use error::{Error, Result};
