//! Simulation toolkit for the pressure dependence of a two-level (Rabi)
//! transition under random collision perturbations.
//!
//! The crate has four layers:
//!
//! - [`qdyn`]: exact two-level quantum dynamics. Free evolution between the
//!   two wells of a double-well system, top-hat impact perturbations that
//!   tilt the wells, stochastic trajectory generation, and density-matrix
//!   diagnostics.
//! - [`classical`]: two perturbed classical oscillator baselines (full
//!   randomization and continuity-constrained impacts), with optional
//!   impact weakening.
//! - [`spectra`]: periodogram / amplitude-spectrum estimation, the
//!   two-term resonance lineshape, and nonlinear least-squares extraction
//!   of the width `b`, peak frequency `nu0`, and amplitude.
//! - [`sweep`]: orchestration of impact-rate sweeps, quench detection,
//!   pressure mapping, and comparison against experimental datasets.
//!
//! Time is measured in Rabi cycles (`omega1 = 2*pi`), so one cycle of the
//! unperturbed oscillation is one time unit and impact rates are given in
//! impacts per cycle.

pub mod classical;
pub mod error;
pub mod qdyn;
pub mod rng;
pub mod series;
pub mod spectra;
pub mod sweep;

pub use error::{Error, Result};
pub use series::TimeSeries;
