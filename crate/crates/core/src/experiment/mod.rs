//! Configuration files, experiment runners and output directories.

mod config;
mod runners;

pub use config::{
    ConfigFile, ExperimentBlock, ExperimentConfig, ForceConfig, GridConfig, OutputConfig, TimeConfig, FORMAT_VERSION,
};
pub use runners::{
    configure_threads, conjugate_table, run_conjugate_table, run_simulate, run_taylor_green, run_verify_rheology, run_weak_strong,
    ConjugateRow, OutputDir, SimulateSummary, TaylorGreenRow, TaylorGreenSummary, VerifySummary,
    CONJUGATE_CSV_HEADER, TAYLOR_GREEN_TOL,
};
