//! Energy-landscape laboratory for layered RY/CZ variational circuits on a
//! qubit ring.
//!
//! The crate simulates the circuit exactly on real state vectors, computes
//! transverse-field Ising energies and their exact first and second
//! derivatives, runs momentum gradient descent, and provides the statistics
//! used to study the resulting landscapes: density-matrix moments, gradient
//! variance scaling, Hessian spectra and gradient/curvature overlaps.

pub mod circuit;
pub mod deriv;
pub mod entropy;
pub mod error;
pub mod hamiltonian;
pub mod moments;
pub mod optimizer;
pub mod rng;
pub mod spectral;
pub mod state;
pub mod stats;
pub mod theorems;

pub use circuit::{CircuitFamily, CircuitRecord, CircuitSpec, ParameterVector};
pub use error::{Error, Result};
pub use hamiltonian::{IsingModel, IsingParams};
pub use state::StateVector;
