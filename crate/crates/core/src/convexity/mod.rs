//! Energy densities, the excess function and quasiconvexity diagnostics.
//!
//! Everything here works on the unit torus with grid means standing in for
//! integrals. The fitted constants are empirical: they majorize (or
//! minorize) the tested family and nothing more.

mod aqc;
mod density;
mod excess;
mod garding;
mod quadratic;

pub use aqc::{aqc_test, AqcBudget, AqcReport, AqcStart, GapFunctional};
pub use density::{
    det2_hessian, growth_samples, make_density, tilde_shift, v_squared, v_squared_gradient, Density, DensitySpec,
    EnergyDensity, GrowthConstants, MonomialSpec, Polynomial, Quadratic, Radial, Shifted,
};
pub use excess::{
    excess, excess_bounds_check, excess_integral, gauss_legendre_32, ExcessBoundsReport, RadiusRow,
};
pub use garding::{
    discrete_modulus, excess_integral_field, fit_garding_constants, frozen_constant,
    garding_adversarial_check, garding_row, garding_verify, quadratic_garding_check, GardingReport,
    GardingRow, GardingSearchBudget, GardingSearchReport, QuadraticGardingOptions,
    QuadraticGardingReport, QuadraticGardingRow, VIOLATION_TOL,
};
pub use quadratic::{
    lambda_convexity_check, quadratic_aqc_value, LambdaConvexityReport, LAMBDA_CONVEX_TOL,
};
