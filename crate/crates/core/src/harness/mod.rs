//! Experiment grids, test objects, configuration files and report output.

pub mod config;
pub mod objects;
pub mod report;
pub mod runner;
pub mod seeds;

pub use config::{ExperimentConfig, Method, NoiseMode, ObjectSource};
pub use objects::BuiltinObject;
pub use report::emit_reports;
pub use runner::{
    run_experiment, run_noise_sweep, run_resolution_scaling, DeltaEntry, ExperimentResult, ResultRow, ScalingReport,
};
