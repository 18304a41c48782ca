//! Discrete-event scenario runner, the three experiments, and report output.

mod config;
mod experiments;
mod report;
mod run;

pub use config::{
    derive_seed, load_scenario, parse_scenario, RunPolicy, Scenario, Template, Workload,
};
pub use experiments::{
    calibration_experiment, calibration_scenario, drifting_qpu, mapped_state_fidelity,
    mapping_benchmarks, mapping_experiment, perturbed_split_qpu, run_experiment,
    runtime_experiment, runtime_qpu, runtime_scenario, split_qpu, CalibrationExperiment,
    MappingExperiment, MappingRow, MappingSummary, RuntimeExperiment, RuntimeRow, RuntimeSummary,
    WindowComparison, EXPERIMENTS, MAPPING_RUNS, RUNTIME_REPS,
};
pub use report::{
    emit_bundle, emit_report, parse_jsonl, to_csv, to_jsonl, CalibrationRecord, CheckRecord,
    FidelitySample, Format, QualitySample, Record, RejectRecord, RenderedTable, Report,
    ReportBundle, SummaryRow, TaskRecord, WindowCount,
};
pub use run::{restricted_noise, run_scenario, simulate_mapped};

use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::circuit::CircuitError;
use crate::mapper::MapError;
use crate::noisy_sim::SimError;
use crate::qpu::QpuError;
use crate::scheduler::SchedulerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unknown experiment `{0}` (expected runtime, calibration or mapping)")]
    UnknownExperiment(String),
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Qpu(#[from] QpuError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
