//! Simulation and analysis toolkit for sideband cooling, state swapping, and
//! coherent feedback control of a mechanical resonator linearly coupled to a
//! superconducting oscillator through a frequency-converting coupling.
//!
//! The crate is organized around the pipeline
//!
//! - [`fock`]: truncated two-mode Fock-space operators and states;
//! - [`model`]: physical parameters → Hamiltonian terms and dissipators;
//! - [`lindblad`]: deterministic density-operator propagation and steady
//!   states of the quantum-optical master equation;
//! - [`mcwf`]: Monte Carlo wave-function (quantum-jump) trajectory ensembles,
//!   seeded and deterministic under parallel execution;
//! - [`langevin`]: linear Heisenberg–Langevin analysis — decay constants,
//!   steady amplitudes, Lyapunov second moments, and an exact Gaussian
//!   moment-propagation engine.

pub mod error;
pub mod fock;
pub mod langevin;
pub mod lindblad;
pub mod mcwf;
pub mod model;
pub mod sparse;

pub use error::{Error, Result};
