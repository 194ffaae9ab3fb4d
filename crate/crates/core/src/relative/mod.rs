//! Relative energy between a coarse run and a strong reference solution,
//! the relative energy inequality in Gronwall form, and the weak-strong
//! convergence experiment.

mod energy;
mod reference;
mod weak_strong;

pub use energy::{relative_energy, verify_r2, R2Options, RelativeEnergyReport, RELATIVE_CSV_HEADER, RTOL_R2};
pub use reference::{FineRun, ManufacturedFlow, ReferenceSolution};
pub use weak_strong::{
    weak_strong_experiment, ConvergenceRow, ReferenceKind, WeakStrongConfig, WeakStrongOutcome,
    DEFAULT_COARSE_N, DEFAULT_REFERENCE_N,
};
