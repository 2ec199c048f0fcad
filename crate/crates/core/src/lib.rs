//! Ising-Hamiltonian minimization laboratory for circulant Möbius-ladder
//! graphs.
//!
//! * [`graph`]: coupling matrices, closed-form spectra, S0/S1 states.
//! * [`oracle`]: exhaustive ground truth for small instances.
//! * [`softspin`]: gain-based soft-spin dynamics (Hopfield–Tank, CIM-I/II/III).
//! * [`landscape`]: critical points of the soft-spin energy and barriers.
//! * [`quantum`]: state-vector quantum annealing.
//! * [`master`]: master-equation simulated/classical annealing and
//!   imaginary-time evolution.
//! * [`verify`]: named end-to-end checks shared by the CLI and test suite.

pub mod error;
pub mod graph;
pub mod landscape;
pub mod master;
pub mod oracle;
pub mod par;
pub mod quantum;
pub mod softspin;
pub mod verify;

pub use error::{Error, Result};
