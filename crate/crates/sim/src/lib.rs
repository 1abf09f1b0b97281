//! Monte-Carlo experiment harness for the `ramp-core` allocator: paired
//! trials over reproducible channel realizations, aggregate power and
//! outage statistics, and machine-readable CSV / JSON-lines output.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Algorithm, ExperimentConfig, OutputFormat};
pub use experiments::{run_outage_experiment, run_power_experiment, OutageCell, PowerCell, TrialRecord};
pub use output::{emit_results, ResultRow};
