//! Simulation and analysis toolkit for a two-ion, mixed-isotope entangling
//! gate experiment.
//!
//! The crate covers the full chain from trap geometry to Bell statistics:
//!
//! - [`crystal`]: equilibrium geometry, axial normal modes, and Lamb-Dicke
//!   parameters of a two-ion crystal with unequal masses.
//! - [`dynamics`]: coherent phase-space trajectories of the state-dependent
//!   optical force, the symmetrized two-qubit phase channel, the oscillating
//!   light-shift error, and a truncated-Fock integration oracle.
//! - [`sequence`]: pulse programs (Ramsey + spin-echo enclosures of the gate)
//!   acting on a two-qubit density matrix with per-qubit phase tracking.
//! - [`noise`]: readout confusion matrices, multinomial shot sampling,
//!   scattering, B-field drift, and ion-order calibration.
//! - [`analysis`]: readout-error inversion, parity-fringe fits, maximum
//!   likelihood tomography, and CHSH correlation statistics.
//!
//! All frequencies are in Hz, times in seconds, lengths in meters, and fields
//! in tesla unless a doc comment says otherwise. Angles are radians.

pub mod analysis;
pub mod constants;
pub mod crystal;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod noise;
pub mod sequence;

pub use error::{Error, Result};
