//! Solvers for cooling by non-reciprocal transport in bosonic chains.
//!
//! A chain of bosonic modes with asymmetric nearest-neighbour hopping
//! (`t e^A` rightwards, `t e^-A` leftwards) redistributes thermal excitations
//! towards one edge. This crate computes the resulting occupations through
//! several independent routes:
//!
//! * [`steady`]: classical rate equations with non-reciprocal transition rates.
//! * [`spectral`]: occupations from the right eigenvectors of the hopping matrix.
//! * [`dynamics`]: time-domain engines (normalized single excitation and
//!   linearized second moments).
//! * [`oracle`]: brute-force nonlinear master equation on a truncated Fock space.
//!
//! All energies and rates are in units of the reference coupling `t`; times
//! are in units of `1/t`.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod spectral;
pub mod steady;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{Bond, ChainSpec, HoppingMatrix, ModeParams, RateMatrix};
pub use num_complex::Complex64;
