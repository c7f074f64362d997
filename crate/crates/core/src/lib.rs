//! Coherent functional expansion of a non-relativistic Bose gas.
//!
//! * [`coherent`]: coherent-state overlaps, number projection and Gram kernels.
//! * [`operator`]: the phase-functional Fokker–Planck operator assembled in a
//!   truncated Hermite basis over the real coordinates of the phase modes.
//! * [`spectral`]: non-Hermitian eigen-analysis and the ε perturbation series.
//! * [`fock`]: exact diagonalization of the same gas in a fixed-N Fock sector.
//!
//! All operators use units with `ħ²/2m = 1`.

pub mod coherent;
pub mod error;
pub mod fock;
pub mod hermite;
pub mod lattice;
pub mod operator;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use lattice::{ModeLattice, SpatialGrid};
pub use num_complex::Complex64;
