//! Batch runner for the nsmild verification experiments: configuration,
//! pipelines, reports and field snapshots.

pub mod app;
pub mod config;
pub mod experiments;
pub mod report;
pub mod snapshot;

pub use config::{ExperimentConfig, ExperimentKind, ReportFormat};
pub use experiments::{check_ids, run_experiment, Run};
pub use report::{emit_report, Check, Series, VerificationReport};
