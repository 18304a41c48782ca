use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::{decompose_to_native, Circuit, CircuitError};
use crate::mapper::MappedCircuit;
use crate::noisy_sim::Distribution;
use crate::qpu::QpuId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    General,
    Calibration,
}

/// Execution-time model: every native gate takes `gate_ms` per shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timing {
    pub gate_ms: f64,
    pub shots: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            gate_ms: 1.0,
            shots: 1000,
        }
    }
}

impl Timing {
    /// Whole seconds, at least one.
    pub fn runtime(&self, native_gates: usize) -> u64 {
        let secs = native_gates as f64 * self.gate_ms * self.shots as f64 / 1000.0;
        (secs.ceil() as u64).max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumTask {
    pub id: TaskId,
    pub n_qubits_required: usize,
    pub program: Circuit,
    pub qpu_id: Option<QpuId>,
    pub task_type: TaskType,
    /// Only distinguishes calibration (0, highest) from general work (1).
    pub priority: u8,
    pub submit_time: u64,
    pub est_runtime: u64,
    pub explicit_qubits: Option<BTreeSet<usize>>,
}

impl QuantumTask {
    /// A general task whose runtime estimate comes from its native gate count.
    pub fn general(
        id: TaskId,
        program: Circuit,
        submit_time: u64,
        timing: &Timing,
    ) -> Result<Self, CircuitError> {
        let native = decompose_to_native(&program)?;
        Ok(QuantumTask {
            id,
            n_qubits_required: program.n_qubits,
            est_runtime: timing.runtime(native.len()),
            program,
            qpu_id: None,
            task_type: TaskType::General,
            priority: 1,
            submit_time,
            explicit_qubits: None,
        })
    }

    pub fn is_calibration(&self) -> bool {
        self.task_type == TaskType::Calibration
    }
}

/// One task's share of a transaction.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub task: QuantumTask,
    /// Physical qubits the member holds.
    pub footprint: BTreeSet<usize>,
    /// `None` for calibration members.
    pub mapped: Option<MappedCircuit>,
}

/// Tasks co-executed on one processor, all-or-nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumTransaction {
    pub id: u64,
    pub qpu_id: QpuId,
    pub members: Vec<Member>,
    pub footprint: BTreeSet<usize>,
}

impl QuantumTransaction {
    pub fn task_ids(&self) -> Vec<TaskId> {
        self.members.iter().map(|m| m.task.id).collect()
    }

    pub fn duration(&self) -> u64 {
        self.members
            .iter()
            .map(|m| m.task.est_runtime)
            .max()
            .unwrap_or(0)
    }

    pub fn calibration_targets(&self) -> BTreeSet<usize> {
        self.members
            .iter()
            .filter(|m| m.task.is_calibration())
            .flat_map(|m| m.footprint.iter().copied())
            .collect()
    }
}

/// A dispatched transaction bound to its processor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumThread {
    pub transaction_id: u64,
    pub qpu_id: QpuId,
    pub task_ids: Vec<TaskId>,
    pub start_time: u64,
    pub expected_end: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletedTask {
    pub id: TaskId,
    pub task_type: TaskType,
    pub n_qubits: usize,
    pub qpu_id: QpuId,
    pub transaction_id: u64,
    pub submit_time: u64,
    pub start_time: u64,
    pub end_time: u64,
    /// Mapped fidelity score; 1 for calibration work.
    pub fidelity_score: f64,
    pub footprint: Vec<usize>,
    pub result: Option<Distribution>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedTask {
    pub id: TaskId,
    pub time: u64,
    pub reason: String,
}

/// Records of the JSON-lines event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Submit {
        time: u64,
        task: TaskId,
        kind: TaskType,
        qubits: usize,
        est_runtime: u64,
    },
    Dispatch {
        time: u64,
        transaction: u64,
        qpu: QpuId,
        tasks: Vec<TaskId>,
        footprint: Vec<usize>,
        calibration_region: Vec<usize>,
        expected_end: u64,
    },
    Complete {
        time: u64,
        transaction: u64,
        qpu: QpuId,
        tasks: Vec<TaskId>,
    },
    Reject {
        time: u64,
        task: TaskId,
        reason: String,
    },
    CalibrationCheck {
        time: u64,
        qpu: QpuId,
        flagged: Vec<String>,
        interval: u64,
    },
    Calibrated {
        time: u64,
        qpu: QpuId,
        targets: Vec<usize>,
    },
}

impl Event {
    pub fn time(&self) -> u64 {
        match self {
            Event::Submit { time, .. }
            | Event::Dispatch { time, .. }
            | Event::Complete { time, .. }
            | Event::Reject { time, .. }
            | Event::CalibrationCheck { time, .. }
            | Event::Calibrated { time, .. } => *time,
        }
    }
}
