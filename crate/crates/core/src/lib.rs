//! Spontaneous emission of a two-level atom into a finite box of field
//! modes, the diagonal entropy of the emitted photon, and the classical
//! damped-dipole analog.
//!
//! Units are natural: ħ = c = ε₀ = 1 unless a parameter set says otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classical;
pub mod dynamics;
pub mod entropy;
pub mod io;
pub mod modes;
pub mod params;
pub mod scenario;
pub mod spectra;

pub use dynamics::{AmplitudeState, Frame, IntegratorOptions};
pub use entropy::{diagonal_entropy, EntropyReport};
pub use modes::{Mode, ModeOptions, ModeSet};
pub use params::{Dimension, ParamsConfig, PhysicalParams};
pub use spectra::SpectralDistribution;
