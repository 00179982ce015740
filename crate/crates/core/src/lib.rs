//! Ground-state fidelity susceptibility of the disordered transverse-field XY
//! chain, computed through its quasi-free-fermion representation.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] maps a disorder realization onto the fermionic quadratic form `(A, B)`.
//! * [`disorder`] draws reproducible Gaussian realizations.
//! * [`spectral`] holds the polar decomposition, fidelity and susceptibility kernels.
//! * [`ensemble`] averages over realizations, in parallel but deterministically.
//! * [`scaling`] sweeps parameter grids and fits finite-size scaling dimensions.
//! * [`oracle`] provides independent small-system references (exact
//!   diagonalization, clean-chain closed forms, BCS-state reconstruction).

// `!(x > 0.0)` is the idiom here for rejecting NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod disorder;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scaling;
pub mod spectral;

pub use error::{Error, Result};
