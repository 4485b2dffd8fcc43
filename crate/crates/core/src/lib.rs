//! Spectral toolkit for constant-rank constrained fields on the unit torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`opsym`]: homogeneous constant-coefficient operators, their symbols,
//!   wave cones, kernel projectors and pseudo-inverses.
//! * [`spectral`]: grids, periodic fields, Fourier transforms, operator
//!   application and (negative) Sobolev norms.
//! * [`projection`]: the A-free projection, potential primitives and the
//!   oscillation/concentration decomposition of sequences.
//! * [`convexity`]: energy densities, the excess function, wave-cone
//!   convexity, adversarial quasiconvexity search and Gårding fits.
//! * [`dynamics`]: conservation laws with involutions, a pseudo-spectral
//!   solver and the relative-entropy stability monitor.
//! * [`statics`]: sufficiency checks for constrained local minimisers.

pub mod convexity;
pub mod dynamics;
mod error;
pub mod opsym;
pub mod projection;
pub mod report;
pub mod spectral;
pub mod statics;

pub use error::{Error, Result};
pub use nalgebra::{Complex, DMatrix, DVector};

/// Complex scalar used for symbols and Fourier coefficients.
pub type C64 = Complex<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
