//! Weakly nonlinear surface waves on a plasma-vacuum interface.
//!
//! The crate covers the whole chain from the linear problem to the nonlinear
//! amplitude equation:
//!
//! - [`dispersion`]: real roots of the surface-wave dispersion relation and
//!   the constants derived from a chosen phase velocity.
//! - [`kernels`]: every interaction kernel of the amplitude equation, plus an
//!   identity suite that checks the algebra connecting them.
//! - [`spectral`]: periodic collocation grids, Hermitian coefficient storage,
//!   Hilbert/derivative multipliers and dealiased products.
//! - [`solver`]: RK4 evolution of the amplitude equation in four equivalent
//!   formulations.
//! - [`fields`]: reconstruction of the first-order plasma and vacuum fields and
//!   their interface (jump) conditions.
//! - [`analysis`]: Sobolev-scale norms, existence-time scaling, blow-up
//!   indicators and the `L¹` interpolation inequality.
//! - [`verify`] and [`bench`]: reusable check suites and timing harness used by
//!   the command-line driver.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bench;
pub mod dispersion;
mod error;
pub mod fields;
pub mod kernels;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};

/// Sign function with `sgn(0) = 0`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
