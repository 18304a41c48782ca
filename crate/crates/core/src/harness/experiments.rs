use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, RunPolicy, Scenario, Template, Workload};
use super::report::{Format, Record, RenderedTable, Report, ReportBundle, SummaryRow};
use super::run::{restricted_noise, run_scenario};
use super::HarnessError;
use crate::calibration::CalibrationPolicy;
use crate::circuit::{generate_benchmark, Benchmark, Circuit, DjOracle, Gate};
use crate::mapper::{map_circuit, map_naive, MappedCircuit, DEFAULT_BEAM};
use crate::noisy_sim::{simulate_ideal, simulate_noisy, state_fidelity};
use crate::qpu::{
    build_qpu, DecaySpec, DriftSpec, ElementValues, FidelityOverride, FidelitySpec, QpuId,
    QpuModel, QpuSpec, TopologySpec,
};
use crate::scheduler::Timing;

pub const EXPERIMENTS: [&str; 3] = ["runtime", "calibration", "mapping"];

/// Repetitions per runtime scenario.
pub const RUNTIME_REPS: usize = 10;
/// Runs per benchmark in the mapping experiment.
pub const MAPPING_RUNS: usize = 4;

macro_rules! row {
    ($(#[$m:meta])* pub struct $name:ident { $(pub $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        pub struct $name { $(pub $field: $ty),* }
        impl Record for $name {
            const COLUMNS: &'static [&'static str] = &[$(stringify!($field)),*];
        }
    };
}

row! {
    pub struct RuntimeRow {
        pub scenario: String,
        pub qpus: usize,
        pub tasks_per_transaction: usize,
        pub rep: usize,
        pub makespan: u64,
    }
}

row! {
    pub struct RuntimeSummary {
        pub scenario: String,
        pub mean_makespan: f64,
        pub min_makespan: u64,
        pub max_makespan: u64,
    }
}

row! {
    pub struct WindowComparison {
        pub start: u64,
        pub end: u64,
        pub calibrated: u64,
        pub uncalibrated: u64,
    }
}

row! {
    pub struct MappingRow {
        pub benchmark: String,
        pub run: usize,
        pub arm: String,
        pub state_fidelity: f64,
        pub mapped_score: f64,
        pub swaps: usize,
        pub qubits: String,
    }
}

row! {
    pub struct MappingSummary {
        pub benchmark: String,
        pub aware_mean: f64,
        pub naive_mean: f64,
    }
}

/// The default 8-qubit processor used by the runtime experiment.
pub fn runtime_qpu() -> QpuSpec {
    QpuSpec::uniform_grid(2, 4, 0.995, 0.99, 0.995)
}

/// 2×4 grid whose right half (qubits 2, 3, 6, 7) is markedly better.
pub fn split_qpu() -> QpuSpec {
    QpuSpec {
        topology: TopologySpec::Grid { rows: 2, cols: 4 },
        fidelity: FidelitySpec {
            single: ElementValues::Uniform(0.90),
            two: ElementValues::Uniform(0.88),
            measure: ElementValues::Uniform(0.97),
            region: vec![FidelityOverride {
                qubits: vec![2, 3, 6, 7],
                single: Some(0.99),
                two: Some(0.97),
                measure: None,
            }],
        },
        drift: DriftSpec::default(),
    }
}

/// A drifting 2×4 grid: without calibration the single-qubit and coupler
/// thresholds are crossed roughly three hours in.
pub fn drifting_qpu() -> QpuSpec {
    let single = DecaySpec {
        tau: 104_400.0,
        floor: 0.85,
    };
    QpuSpec {
        topology: TopologySpec::Grid { rows: 2, cols: 4 },
        fidelity: FidelitySpec {
            single: ElementValues::Uniform(0.995),
            two: ElementValues::Uniform(0.985),
            measure: ElementValues::Uniform(0.995),
            region: Vec::new(),
        },
        drift: DriftSpec {
            single: Some(single),
            two: Some(DecaySpec {
                tau: 82_000.0,
                floor: 0.70,
            }),
            measure: Some(single),
            jitter_sigma: 0.0001,
            seed: 11,
        },
    }
}

fn ghz_workload(qubits: Vec<usize>) -> Vec<Template> {
    vec![Template {
        benchmark: Some("ghz".into()),
        qubits,
        circuit: None,
    }]
}

/// `qpus` processors, ten GHZ(2) tasks at time zero, `per_txn` tasks per transaction.
pub fn runtime_scenario(qpus: usize, per_txn: usize, seed: u64) -> Scenario {
    Scenario {
        name: format!("{per_txn}circ-{qpus}qpu"),
        duration: 600,
        seed,
        qpu: vec![runtime_qpu(); qpus],
        workload: Workload {
            templates: ghz_workload(vec![2]),
            arrivals: vec![0; 10],
            ..Default::default()
        },
        policy: RunPolicy {
            max_tasks_per_transaction: per_txn,
            ..Default::default()
        },
        calibration: CalibrationPolicy::default(),
        timing: Timing::default(),
    }
}

/// One simulated day of GHZ(2)/GHZ(3) arrivals every 10 s on a drifting processor.
pub fn calibration_scenario(calibrate: bool, seed: u64) -> Scenario {
    Scenario {
        name: if calibrate {
            "calibrated"
        } else {
            "uncalibrated"
        }
        .into(),
        duration: 86_400,
        seed,
        qpu: vec![drifting_qpu()],
        workload: Workload {
            templates: ghz_workload(vec![2, 3]),
            interval: Some(10),
            ..Default::default()
        },
        policy: RunPolicy {
            calibration: calibrate,
            task_timeout: Some(600),
            trace_interval: 600,
            ..Default::default()
        },
        calibration: CalibrationPolicy {
            max_targets: Some(4),
            ..Default::default()
        },
        timing: Timing::default(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeExperiment {
    pub rows: Vec<RuntimeRow>,
    pub summary: Vec<RuntimeSummary>,
    /// First repetition of each scenario.
    pub reports: Vec<Report>,
}

impl RuntimeExperiment {
    pub fn mean(&self, scenario: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.scenario == scenario)
            .map(|s| s.mean_makespan)
    }
}

pub fn runtime_experiment(seed: u64) -> Result<RuntimeExperiment, HarnessError> {
    let configs = [(1usize, 1usize), (1, 2), (2, 1), (2, 2)];
    let jobs: Vec<(usize, usize, usize)> = configs
        .iter()
        .flat_map(|&(per, qpus)| (0..RUNTIME_REPS).map(move |r| (per, qpus, r)))
        .collect();
    let runs: Vec<Report> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, &(per, qpus, _))| {
            run_scenario(&runtime_scenario(qpus, per, derive_seed(seed, k as u64)))
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<RuntimeRow> = jobs
        .iter()
        .zip(&runs)
        .map(|(&(per, qpus, rep), r)| RuntimeRow {
            scenario: r.name.clone(),
            qpus,
            tasks_per_transaction: per,
            rep,
            makespan: r.makespan,
        })
        .collect();
    let summary = configs
        .iter()
        .map(|&(per, qpus)| {
            let name = format!("{per}circ-{qpus}qpu");
            let ms: Vec<u64> = rows
                .iter()
                .filter(|r| r.scenario == name)
                .map(|r| r.makespan)
                .collect();
            RuntimeSummary {
                scenario: name,
                mean_makespan: ms.iter().sum::<u64>() as f64 / ms.len() as f64,
                min_makespan: *ms.iter().min().expect("reps"),
                max_makespan: *ms.iter().max().expect("reps"),
            }
        })
        .collect();
    let reports = jobs
        .iter()
        .zip(runs)
        .filter(|((_, _, rep), _)| *rep == 0)
        .map(|(_, r)| r)
        .collect();
    Ok(RuntimeExperiment {
        rows,
        summary,
        reports,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationExperiment {
    pub calibrated: Report,
    pub uncalibrated: Report,
    pub windows: Vec<WindowComparison>,
    /// First trace instant at which the uncalibrated probe score fell below 0.5.
    pub crossing: Option<u64>,
    /// General tasks completed at or after `crossing`, per arm.
    pub calibrated_after: usize,
    pub uncalibrated_after: usize,
}

impl CalibrationExperiment {
    /// Checks after the first completed calibration whose worst single-gate
    /// or coupler fidelity was below threshold.
    pub fn violations(&self, policy: &CalibrationPolicy) -> Vec<u64> {
        let Some(first) = self.calibrated.calibrations.first().map(|c| c.time) else {
            return Vec::new();
        };
        self.calibrated
            .checks
            .iter()
            .filter(|c| c.time > first)
            .filter(|c| {
                c.min_single < policy.single_threshold || c.min_two < policy.double_threshold
            })
            .map(|c| c.time)
            .collect()
    }
}

pub fn calibration_experiment(seed: u64) -> Result<CalibrationExperiment, HarnessError> {
    let (cal, uncal) = rayon::join(
        || run_scenario(&calibration_scenario(true, seed)),
        || run_scenario(&calibration_scenario(false, seed)),
    );
    let (calibrated, uncalibrated) = (cal?, uncal?);
    let windows = calibrated
        .throughput
        .iter()
        .zip(&uncalibrated.throughput)
        .map(|(a, b)| WindowComparison {
            start: a.start,
            end: a.end,
            calibrated: a.completed,
            uncalibrated: b.completed,
        })
        .collect();
    let crossing = uncalibrated
        .quality
        .iter()
        .find(|q| q.reference_score.is_some_and(|s| s < 0.5))
        .map(|q| q.timestamp);
    let after =
        |r: &Report| crossing.map_or(0, |t| r.general_tasks().filter(|x| x.end >= t).count());
    Ok(CalibrationExperiment {
        calibrated_after: after(&calibrated),
        uncalibrated_after: after(&uncalibrated),
        calibrated,
        uncalibrated,
        windows,
        crossing,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MappingExperiment {
    pub rows: Vec<MappingRow>,
    pub summary: Vec<MappingSummary>,
    /// Largest trace deviation over every noisy simulation.
    pub max_trace_error: f64,
}

pub fn mapping_benchmarks() -> Vec<Benchmark> {
    vec![
        Benchmark::Qft,
        Benchmark::Ghz,
        Benchmark::DeutschJozsa(DjOracle::Balanced),
        Benchmark::bv_all_ones(4),
    ]
}

/// State fidelity of the noisy run of `m` against its own ideal run, both
/// restricted to the qubits the mapping touches. Returns the trace error too.
pub fn mapped_state_fidelity(
    m: &MappedCircuit,
    qpu: &QpuModel,
) -> Result<(f64, f64), HarnessError> {
    let physical: Vec<usize> = m.footprint().into_iter().collect();
    let mut c = Circuit::new(physical.len());
    for g in &m.circuit.gates {
        let q: Vec<usize> = g
            .qubits
            .iter()
            .map(|p| physical.binary_search(p).expect("gate inside footprint"))
            .collect();
        c.push(Gate::new(g.kind, q, g.params.clone()));
    }
    let ideal = simulate_ideal(&c)?;
    let noisy = simulate_noisy(&c, &restricted_noise(qpu, &physical))?;
    Ok((
        state_fidelity(&ideal.psi, &noisy.state)?,
        noisy.max_trace_error,
    ))
}

/// The split processor with a small seeded perturbation of every element.
pub fn perturbed_split_qpu(seed: u64) -> Result<QpuModel, HarnessError> {
    let mut spec = split_qpu();
    spec.drift.jitter_sigma = 0.002;
    spec.drift.seed = seed;
    let mut q = build_qpu(QpuId(0), &spec)?;
    q.apply_drift(0)?;
    Ok(q)
}

pub fn mapping_experiment(seed: u64) -> Result<MappingExperiment, HarnessError> {
    let benches = mapping_benchmarks();
    let jobs: Vec<(usize, usize)> = (0..MAPPING_RUNS)
        .flat_map(|run| (0..benches.len()).map(move |b| (run, b)))
        .collect();
    let results: Vec<(Vec<MappingRow>, f64)> = jobs
        .par_iter()
        .map(|&(run, b)| {
            let qpu = perturbed_split_qpu(derive_seed(seed, run as u64))?;
            let c = generate_benchmark(&benches[b], 4)?;
            let all: BTreeSet<usize> = (0..qpu.n_qubits()).collect();
            let aware = map_circuit(&c, &qpu, DEFAULT_BEAM)?;
            let naive = map_naive(&c, &qpu, &all)?;
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for (arm, m) in [("aware", &aware), ("naive", &naive)] {
                let (f, err) = mapped_state_fidelity(m, &qpu)?;
                worst = worst.max(err);
                rows.push(MappingRow {
                    benchmark: label(&benches[b]),
                    run,
                    arm: arm.into(),
                    state_fidelity: f,
                    mapped_score: m.fidelity_score,
                    swaps: m.swap_count,
                    qubits: m
                        .final_layout
                        .iter()
                        .map(|q| q.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                });
            }
            Ok((rows, worst))
        })
        .collect::<Result<_, HarnessError>>()?;
    let max_trace_error = results.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let mut rows: Vec<MappingRow> = results.into_iter().flat_map(|(r, _)| r).collect();
    rows.sort_by(|a, b| {
        (bench_index(&benches, &a.benchmark), a.run, &a.arm).cmp(&(
            bench_index(&benches, &b.benchmark),
            b.run,
            &b.arm,
        ))
    });
    let summary = benches
        .iter()
        .map(|b| {
            let name = label(b);
            let mean = |arm: &str| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.benchmark == name && r.arm == arm)
                    .map(|r| r.state_fidelity)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            MappingSummary {
                aware_mean: mean("aware"),
                naive_mean: mean("naive"),
                benchmark: name,
            }
        })
        .collect();
    Ok(MappingExperiment {
        rows,
        summary,
        max_trace_error,
    })
}

fn label(b: &Benchmark) -> String {
    match b {
        Benchmark::BernsteinVazirani(_) => "bv".into(),
        other => other.to_string(),
    }
}

fn bench_index(benches: &[Benchmark], name: &str) -> usize {
    benches
        .iter()
        .position(|b| label(b) == name)
        .unwrap_or(usize::MAX)
}

/// Runs a named experiment and renders its cross-run tables.
pub fn run_experiment(name: &str, seed: u64, format: Format) -> Result<ReportBundle, HarnessError> {
    match name {
        "runtime" => {
            let e = runtime_experiment(seed)?;
            Ok(ReportBundle {
                name: name.into(),
                tables: vec![
                    RenderedTable::new("runs", &e.rows, format)?,
                    RenderedTable::new("runtime_summary", &e.summary, format)?,
                ],
                reports: e.reports,
            })
        }
        "calibration" => {
            let e = calibration_experiment(seed)?;
            let summary = vec![
                SummaryRow {
                    metric: "crossing_time".into(),
                    value: e.crossing.map_or(-1.0, |t| t as f64),
                },
                SummaryRow {
                    metric: "calibrated_after_crossing".into(),
                    value: e.calibrated_after as f64,
                },
                SummaryRow {
                    metric: "uncalibrated_after_crossing".into(),
                    value: e.uncalibrated_after as f64,
                },
                SummaryRow {
                    metric: "check_violations".into(),
                    value: e.violations(&e_policy()).len() as f64,
                },
            ];
            Ok(ReportBundle {
                name: name.into(),
                tables: vec![
                    RenderedTable::new("windows", &e.windows, format)?,
                    RenderedTable::new("calibration_summary", &summary, format)?,
                ],
                reports: vec![e.calibrated, e.uncalibrated],
            })
        }
        "mapping" => {
            let e = mapping_experiment(seed)?;
            Ok(ReportBundle {
                name: name.into(),
                tables: vec![
                    RenderedTable::new("mapping_runs", &e.rows, format)?,
                    RenderedTable::new("mapping_summary", &e.summary, format)?,
                ],
                reports: Vec::new(),
            })
        }
        other => Err(HarnessError::UnknownExperiment(other.to_string())),
    }
}

fn e_policy() -> CalibrationPolicy {
    calibration_scenario(true, 0).calibration
}
