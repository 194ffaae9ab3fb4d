//! Fourier-Galerkin discretization on the periodic box with divergence-free
//! modes, dealiased pseudo-spectral nonlinear terms and explicit RK4 stepping.

mod field;
mod grid;
mod initial;
mod ops;
mod run;
mod snapshot;
mod step;

pub use field::{
    seeded_random_smooth, taylor_green, PressureField, SpectralVelocity, StressField, SymTensorField,
};
pub use grid::{TorusGrid, DEFAULT_DEALIAS_FRACTION};
pub use initial::{InitialData, DEFAULT_MAX_MODE, DEFAULT_SPECTRAL_DECAY};
pub use ops::{
    cfl_limit, convective_rhs, gradient, make_basis_projection, project, recover_pressure, sym_gradient,
    unprojected_rhs, velocity_gradient, viscous_rhs, Projection, CFL_ADVECTIVE, CFL_VISCOUS,
};
pub use run::{march, Marched, Observation, TimeStepRule, AUTO_DT_RECHECK, AUTO_DT_SAFETY};
pub use snapshot::{
    decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
};
pub use step::{galerkin_residual, step, BudgetRates, Forcing, StateDiagnostics, StepReport, Stepper};

pub use rustfft::num_complex::Complex64;
