//! Numerical kernel for the big q-Jacobi function transform.
//!
//! Implements the second order q-difference operator `L` on the q-lattice
//! `[-1, inf(z))_q`, its explicit eigenfunctions in terms of basic
//! hypergeometric series, the c-function expansions, the Plancherel measure
//! (continuous density on the unit circle plus discrete atoms), the
//! forward/inverse transform pair, the dual orthogonality relations for the
//! continuous dual q^{-1}-Hahn polynomials, and the compact big q-Jacobi
//! polynomial case.
//!
//! The crate is `no_std` compatible (requires `alloc`); all floating point
//! math goes through `libm` when `std` is absent. IO, file formats and the
//! command line front end live in the companion `qjacobi-cli` crate.
//!
//! Module map:
//! - [`qseries`]: q-shifted factorials, theta products, `_r phi_s` series
//! - [`lattice`]: the q-lattice, weights, the operator `L`, Jackson
//!   integration, inner products and Wronskians
//! - [`eigen`]: eigenvalue map and the eigenfunctions `phi`, `psi`, `Phi`,
//!   `Phi^-`, big q-Jacobi polynomials
//! - [`cfun`]: c-functions, connection coefficients, closed-form Wronskians
//! - [`spectral`]: Plancherel measure, Green kernel, resolvent, Stone's
//!   formula checks
//! - [`transform`]: transform pair, Plancherel verification, dual
//!   orthogonality, the compact polynomial case

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cfun;
pub mod eigen;
pub mod error;
pub mod lattice;
pub mod qseries;
pub mod scaled;
pub mod spectral;
pub mod transform;

pub use error::{Error, Result};
pub use lattice::{Branch, LatticeFunction, LatticePoint, LatticeWindow, Parameters};
pub use qseries::{QBase, SeriesResult};

/// Complex double precision scalar used throughout.
pub type Complex = num_complex::Complex64;
