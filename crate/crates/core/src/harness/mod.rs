//! Experiment harness: configuration, seeded runs, CSV/JSON output and reports.

pub mod config;
pub mod emit;
pub mod report;
pub mod run;
pub mod scaling;

pub use config::{preset, DomainSpec, ExperimentConfig, ProblemLayout, SafeSeedSpec, PRESET_NAMES};
pub use emit::{summary_json, trace_file_name, write_experiment, write_trace_csv};
pub use report::{beta_bar_from_trace, beta_growth_report, BetaGrowthReport, BetaGrowthRow};
pub use run::{
    optimizer_config, run_experiment, run_single, run_single_with_states, ExperimentResult, GroundTruth, ModeAggregate,
    RunResult, RunSummary, RunTrace, TraceRow,
};
pub use scaling::{scaling_csv, scaling_study, ScalingRow};
