//! Numerical core for the two-component nonlinear variational wave (2NVW)
//! system of a nematic liquid crystal with variable order parameter.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the
//! algorithms: potentials and wave speeds, sampled fields, the semilinear
//! Duhamel/Picard solver for the constant-speed case, the semi-Lagrangian
//! fixed-point solver for the full quasilinear system, a Lagrangian marker
//! solver for the two-component Hunter-Saxton (2HS) system, the asymptotic
//! reduction harness and the energy diagnostics shared by all of them.
//!
//! IO, configuration and the command line live in the companion
//! `twonvw-cli` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod asymptotic;
pub mod coefficients;
pub mod diagnostics;
mod error;
pub mod field;
pub mod hs2;
pub mod profiles;
pub mod quasilinear;
pub mod semilinear;

pub use coefficients::{
    apriori_constants, validate_potential, AprioriConstants, BuiltinPotential, Potential,
    ValidationReport, WaveSpeed,
};
pub use error::CoreError;
pub use field::{ComplexField, Grid1D};
pub use num_complex::Complex64;

/// Tolerance for "the perturbation has not reached the truncation boundary".
pub const BOUNDARY_TOL: f64 = 1e-10;
