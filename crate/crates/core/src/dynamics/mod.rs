//! Conservation laws `d_t U + div f(U) = 0` with involutions, a
//! pseudo-spectral solver and the relative-entropy stability monitor.

mod monitor;
mod solver;
mod systems;

pub use monitor::{
    dissipation_check, fit_gronwall, relative_entropy, relative_flux, weak_strong_monitor, weak_strong_runs,
    MonitorRuns,
    DissipationReport, StabilityReport, StabilityRow,
};
pub use solver::{evolve, evolve_with, EvolveOptions, Trajectory, SCHEME};
pub use systems::{
    entropy_compat_check, make_system, make_system_from_spec, mandel_stiffness, ConservationSystem, EntropyCompatReport,
    FluxModel, SystemSpec, SYSTEM_TAGS,
};
