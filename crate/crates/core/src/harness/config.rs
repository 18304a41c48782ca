use std::collections::BTreeSet;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::calibration::CalibrationPolicy;
use crate::circuit::{generate_benchmark, parse_circuit, Benchmark, Circuit};
use crate::mapper::DEFAULT_BEAM;
use crate::qpu::{build_qpu, QpuId, QpuModel, QpuSpec};
use crate::scheduler::{SchedulerPolicy, Timing};

/// A complete run description, loaded from TOML:
///
/// ```toml
/// name = "demo"
/// duration = 3600          # simulated seconds, > 0
/// seed = 7
///
/// [[qpu]]
/// topology = { kind = "grid", rows = 2, cols = 4 }
/// [qpu.fidelity]
/// single = 0.995
/// two = 0.99
/// measure = 0.995
///
/// [workload]
/// templates = [{ benchmark = "ghz", qubits = [2, 3] }]
/// interval = 10            # or: arrivals = [0, 0, 5]
///
/// [policy]
/// calibration = true
/// ```
///
/// `[calibration]` takes the calibration policy fields and `[timing]` the
/// per-gate duration and shot count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub duration: i64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub qpu: Vec<QpuSpec>,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default)]
    pub policy: RunPolicy,
    #[serde(default)]
    pub calibration: CalibrationPolicy,
    #[serde(default)]
    pub timing: Timing,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    /// Arrival `k` uses template `k mod len` (after expanding qubit lists).
    #[serde(default)]
    pub templates: Vec<Template>,
    /// Explicit arrival times; excludes `interval`.
    #[serde(default)]
    pub arrivals: Vec<i64>,
    /// Seconds between periodic arrivals, starting at `start`.
    #[serde(default)]
    pub interval: Option<u64>,
    /// Number of periodic arrivals; unbounded within the duration if absent.
    #[serde(default)]
    pub count: Option<u64>,
    #[serde(default)]
    pub start: u64,
}

/// A benchmark family at one or more sizes, or an inline circuit in the
/// line-oriented text format.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    #[serde(default)]
    pub benchmark: Option<String>,
    #[serde(default)]
    pub qubits: Vec<usize>,
    #[serde(default)]
    pub circuit: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunPolicy {
    /// Run the online calibration service.
    pub calibration: bool,
    pub beam: usize,
    pub max_tasks_per_transaction: usize,
    pub min_task_fidelity: f64,
    pub task_timeout: Option<u64>,
    /// Seconds between drift updates.
    pub drift_step: u64,
    /// Seconds between fidelity-trace samples.
    pub trace_interval: u64,
    /// Width of throughput windows.
    pub throughput_window: u64,
    /// Simulate each completed task on the noisy backend and keep its distribution.
    pub simulate_results: bool,
}

impl Default for RunPolicy {
    fn default() -> Self {
        RunPolicy {
            calibration: false,
            beam: DEFAULT_BEAM,
            max_tasks_per_transaction: 8,
            min_task_fidelity: 0.5,
            task_timeout: None,
            drift_step: 60,
            trace_interval: 1200,
            throughput_window: 3600,
            simulate_results: false,
        }
    }
}

impl RunPolicy {
    pub fn scheduler_policy(&self) -> SchedulerPolicy {
        SchedulerPolicy {
            beam: self.beam,
            max_tasks_per_transaction: self.max_tasks_per_transaction,
            min_task_fidelity: self.min_task_fidelity,
            task_timeout: self.task_timeout,
        }
    }
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// 1-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, HarnessError> {
    let s: Scenario = toml::from_str(text).map_err(|e| HarnessError::Parse {
        line: e.span().map_or(1, |r| line_of(text, r.start)),
        message: e.message().to_string(),
    })?;
    s.validate()?;
    Ok(s)
}

/// Per-run seed derived from a master seed and a stream index.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

impl Scenario {
    /// Checks every field; errors name the offending one.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.duration <= 0 {
            return Err(invalid(
                "duration",
                format!("must be > 0, got {}", self.duration),
            ));
        }
        if self.qpu.is_empty() {
            return Err(invalid("qpu", "at least one [[qpu]] section is required"));
        }
        let qpus = self.build_qpus()?;
        let p = &self.policy;
        if p.beam == 0 {
            return Err(invalid("policy.beam", "must be >= 1"));
        }
        if p.max_tasks_per_transaction == 0 {
            return Err(invalid("policy.max_tasks_per_transaction", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&p.min_task_fidelity) {
            return Err(invalid("policy.min_task_fidelity", "must lie in [0, 1]"));
        }
        for (name, v) in [
            ("policy.drift_step", p.drift_step),
            ("policy.trace_interval", p.trace_interval),
            ("policy.throughput_window", p.throughput_window),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be > 0"));
            }
        }
        self.calibration
            .validate()
            .map_err(|e| invalid("calibration", e.to_string()))?;
        if !(self.timing.gate_ms > 0.0 && self.timing.gate_ms.is_finite()) {
            return Err(invalid("timing.gate_ms", "must be > 0"));
        }
        if self.timing.shots == 0 {
            return Err(invalid("timing.shots", "must be > 0"));
        }

        let w = &self.workload;
        if let Some(t) = w.arrivals.iter().find(|&&t| t < 0) {
            return Err(invalid(
                "workload.arrivals",
                format!("arrival time {t} is negative"),
            ));
        }
        if !w.arrivals.is_empty() && w.interval.is_some() {
            return Err(invalid(
                "workload.interval",
                "give either arrivals or interval, not both",
            ));
        }
        if w.interval == Some(0) {
            return Err(invalid("workload.interval", "must be > 0"));
        }
        if w.count.is_some() && w.interval.is_none() {
            return Err(invalid("workload.count", "requires workload.interval"));
        }
        let circuits = self.template_circuits()?;
        let arrivals = self.arrivals();
        if !arrivals.is_empty() && circuits.is_empty() {
            return Err(invalid(
                "workload.templates",
                "arrivals need at least one template",
            ));
        }
        let largest = qpus.iter().map(QpuModel::n_qubits).max().unwrap_or(0);
        if let Some((label, c)) = circuits.iter().find(|(_, c)| c.n_qubits > largest) {
            return Err(invalid(
                "workload.templates",
                format!(
                    "{label} needs {} qubits; the largest processor has {largest}",
                    c.n_qubits
                ),
            ));
        }
        Ok(())
    }

    /// Processors in declaration order, with drift seeds mixed with the run seed.
    pub fn build_qpus(&self) -> Result<Vec<QpuModel>, HarnessError> {
        self.qpu
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut spec = spec.clone();
                spec.drift.seed ^= derive_seed(self.seed, i as u64);
                build_qpu(QpuId(i), &spec).map_err(|e| invalid(format!("qpu[{i}]"), e.to_string()))
            })
            .collect()
    }

    /// Expanded templates as `(label, circuit)`.
    pub fn template_circuits(&self) -> Result<Vec<(String, Circuit)>, HarnessError> {
        let mut out = Vec::new();
        for (i, t) in self.workload.templates.iter().enumerate() {
            let field = format!("workload.templates[{i}]");
            match (&t.benchmark, &t.circuit) {
                (Some(b), None) => {
                    let kind: Benchmark =
                        b.parse().map_err(|e: crate::circuit::CircuitError| {
                            invalid(&field, e.to_string())
                        })?;
                    if t.qubits.is_empty() {
                        return Err(invalid(&field, "qubits must list at least one size"));
                    }
                    for &n in &t.qubits {
                        let c = generate_benchmark(&kind, n)
                            .map_err(|e| invalid(&field, e.to_string()))?;
                        out.push((format!("{kind}-{n}"), c));
                    }
                }
                (None, Some(text)) => {
                    if !t.qubits.is_empty() {
                        return Err(invalid(&field, "qubits applies to benchmarks only"));
                    }
                    let c = parse_circuit(text).map_err(|e| invalid(&field, e.to_string()))?;
                    out.push((format!("inline-{i}"), c));
                }
                _ => return Err(invalid(&field, "set exactly one of benchmark or circuit")),
            }
        }
        Ok(out)
    }

    /// Arrival times in order; periodic arrivals stop at the duration.
    pub fn arrivals(&self) -> Vec<u64> {
        let w = &self.workload;
        let mut times: Vec<u64> = match w.interval {
            Some(step) if step > 0 => {
                let end = self.duration.max(0) as u64;
                let limit = w.count.unwrap_or(u64::MAX);
                (0..limit)
                    .map(|k| w.start.saturating_add(k.saturating_mul(step)))
                    .take_while(|&t| t < end)
                    .collect()
            }
            _ => w.arrivals.iter().map(|&t| t.max(0) as u64).collect(),
        };
        times.sort_unstable();
        times
    }

    /// The widest template (first among equals), used as the probe circuit
    /// for mapped-score traces.
    pub fn reference_circuit(&self) -> Result<Option<(String, Circuit)>, HarnessError> {
        let circuits = self.template_circuits()?;
        let mut best: Option<(String, Circuit)> = None;
        for (label, c) in circuits {
            if best.as_ref().is_none_or(|(_, b)| c.n_qubits > b.n_qubits) {
                best = Some((label, c));
            }
        }
        Ok(best)
    }

    pub fn qpu_ids(&self) -> BTreeSet<QpuId> {
        (0..self.qpu.len()).map(QpuId).collect()
    }
}
