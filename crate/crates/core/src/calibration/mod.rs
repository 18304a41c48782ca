//! Online calibration: threshold checks with an adaptive interval, calibration
//! task generation, and restoration of drifted fidelities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::qpu::{Element, ElementClass, QpuError, QpuId, QpuModel};
use crate::scheduler::{QuantumTask, TaskId, TaskType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("invalid calibration policy: {0}")]
    Policy(String),
    #[error("nothing flagged; no calibration task to build")]
    NothingFlagged,
    #[error("qubit {0} is not in the calibration region")]
    NotInRegion(usize),
    #[error("{element} restored to {value}, below its threshold {threshold}")]
    BelowThreshold {
        element: Element,
        value: f64,
        threshold: f64,
    },
    #[error(transparent)]
    Qpu(#[from] QpuError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationPolicy {
    pub single_threshold: f64,
    pub double_threshold: f64,
    pub interval_max: u64,
    pub interval_min: u64,
    pub interval_step: u64,
    /// Seconds of calibration per target qubit.
    pub calib_duration: u64,
    /// Restoration factor is drawn from `[restore_floor, 1)`.
    pub restore_floor: f64,
    /// Also flag elements whose recent trend would cross a threshold before
    /// the next check could repair them.
    pub lookahead: bool,
    /// Caps the qubits one calibration task may occupy; the most urgent
    /// flags go first and the rest follow in the next task.
    pub max_targets: Option<usize>,
}

impl Default for CalibrationPolicy {
    fn default() -> Self {
        CalibrationPolicy {
            single_threshold: 0.98,
            double_threshold: 0.95,
            interval_max: 3600,
            interval_min: 1200,
            interval_step: 1200,
            calib_duration: 300,
            restore_floor: 0.998,
            lookahead: true,
            max_targets: None,
        }
    }
}

impl CalibrationPolicy {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::Policy(m));
        for (name, t) in [
            ("single_threshold", self.single_threshold),
            ("double_threshold", self.double_threshold),
        ] {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {t}"));
            }
        }
        if self.interval_min == 0 || self.interval_min > self.interval_max {
            return bad(format!(
                "need 0 < interval_min <= interval_max, got {} and {}",
                self.interval_min, self.interval_max
            ));
        }
        if self.interval_step == 0 {
            return bad("interval_step must be > 0".into());
        }
        if self.calib_duration == 0 {
            return bad("calib_duration must be > 0".into());
        }
        if !(self.restore_floor > 0.0 && self.restore_floor <= 1.0) {
            return bad(format!(
                "restore_floor must lie in (0, 1], got {}",
                self.restore_floor
            ));
        }
        if self.max_targets.is_some_and(|m| m < 2) {
            return bad("max_targets must be at least 2 so a coupler fits".into());
        }
        Ok(())
    }

    pub fn threshold(&self, class: ElementClass) -> f64 {
        match class {
            ElementClass::Two => self.double_threshold,
            ElementClass::Single | ElementClass::Measure => self.single_threshold,
        }
    }
}

/// A flagged qubit (single-gate or readout) or coupler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Flag {
    Qubit(usize),
    Edge(usize, usize),
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::Qubit(q) => write!(f, "q{q}"),
            Flag::Edge(a, b) => write!(f, "e{a}-{b}"),
        }
    }
}

fn flag_of(e: Element) -> Flag {
    match e {
        Element::Single(q) | Element::Measure(q) => Flag::Qubit(q),
        Element::Two(a, b) => Flag::Edge(a, b),
    }
}

/// Qubits below the single threshold (gate or readout) and couplers below the
/// two-qubit threshold, ascending.
pub fn check_fidelities(qpu: &QpuModel, policy: &CalibrationPolicy) -> Vec<Flag> {
    let mut out = BTreeSet::new();
    for (e, f) in qpu.fidelity_rows() {
        if f < policy.threshold(e.class()) {
            out.insert(flag_of(e));
        }
    }
    out.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    pub current_interval: u64,
    pub next_check_time: u64,
    pub flagged: Vec<Flag>,
    /// A calibration task is queued or running.
    pub pending: bool,
    /// Flags left for the follow-up task when `max_targets` split the work.
    pub deferred: Vec<Flag>,
    last_seen: BTreeMap<Element, (u64, f64)>,
    /// Observed decline per second.
    slope: BTreeMap<Element, f64>,
}

impl CalibrationState {
    pub fn new(policy: &CalibrationPolicy, now: u64) -> Self {
        CalibrationState {
            current_interval: policy.interval_max,
            next_check_time: now + policy.interval_max,
            flagged: Vec::new(),
            pending: false,
            deferred: Vec::new(),
            last_seen: BTreeMap::new(),
            slope: BTreeMap::new(),
        }
    }
}

/// Resets to the longest interval after a trigger; otherwise shortens by one step.
pub fn update_interval(state: &mut CalibrationState, policy: &CalibrationPolicy, triggered: bool) {
    state.current_interval = if triggered {
        policy.interval_max
    } else {
        state
            .current_interval
            .saturating_sub(policy.interval_step)
            .max(policy.interval_min)
    };
}

/// Qubits a calibration of `flagged` must occupy.
pub fn calibration_targets(flagged: &[Flag]) -> BTreeSet<usize> {
    flagged
        .iter()
        .flat_map(|f| match *f {
            Flag::Qubit(q) => vec![q],
            Flag::Edge(a, b) => vec![a, b],
        })
        .collect()
}

pub fn build_calibration_task(
    qpu: &QpuModel,
    flagged: &[Flag],
    policy: &CalibrationPolicy,
    now: u64,
    id: TaskId,
) -> Result<QuantumTask, CalibrationError> {
    if flagged.is_empty() {
        return Err(CalibrationError::NothingFlagged);
    }
    let targets = calibration_targets(flagged);
    if let Some(&q) = targets.iter().find(|&&q| q >= qpu.n_qubits()) {
        return Err(QpuError::NoSuchQubit(q).into());
    }
    Ok(QuantumTask {
        id,
        n_qubits_required: targets.len(),
        program: Circuit::new(targets.len()),
        qpu_id: Some(qpu.id),
        task_type: TaskType::Calibration,
        priority: 0,
        submit_time: now,
        est_runtime: policy.calib_duration * targets.len() as u64,
        explicit_qubits: Some(targets),
    })
}

/// Restores every element of the targets (single-gate and readout of each
/// target qubit, couplers with both ends among the targets) to its baseline
/// times a factor drawn from `[restore_floor, 1)`, clamped to 1.
pub fn apply_calibration(
    qpu: &mut QpuModel,
    targets: &BTreeSet<usize>,
    policy: &CalibrationPolicy,
) -> Result<Vec<(Element, f64)>, CalibrationError> {
    for &q in targets {
        if !qpu.calibration_region().contains(&q) {
            return Err(CalibrationError::NotInRegion(q));
        }
    }
    let elements: Vec<Element> = qpu
        .elements()
        .into_iter()
        .filter(|e| match *e {
            Element::Single(q) | Element::Measure(q) => targets.contains(&q),
            Element::Two(a, b) => targets.contains(&a) && targets.contains(&b),
        })
        .collect();
    let mut restored = Vec::with_capacity(elements.len());
    for e in elements {
        let baseline = qpu.element_baseline(e).expect("listed element");
        let factor = qpu.restoration_factor(policy.restore_floor, 1.0);
        let value = (baseline * factor).min(1.0);
        let threshold = policy.threshold(e.class());
        if value < threshold {
            return Err(CalibrationError::BelowThreshold {
                element: e,
                value,
                threshold,
            });
        }
        qpu.set_fidelity(e, value)?;
        restored.push((e, value));
    }
    Ok(restored)
}

/// What one periodic check saw and decided.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub time: u64,
    pub qpu: QpuId,
    /// Elements below threshold right now.
    pub below: Vec<Flag>,
    /// Everything scheduled for calibration (below plus predicted).
    pub flagged: Vec<Flag>,
    pub interval: u64,
    pub min_single: f64,
    pub min_two: f64,
    pub min_measure: f64,
    pub task: Option<QuantumTask>,
}

/// Per-processor check loop.
#[derive(Clone, Debug)]
pub struct CalibrationService {
    pub policy: CalibrationPolicy,
    states: BTreeMap<QpuId, CalibrationState>,
}

impl CalibrationService {
    pub fn new(
        policy: CalibrationPolicy,
        qpus: &[QpuId],
        now: u64,
    ) -> Result<Self, CalibrationError> {
        policy.validate()?;
        let states = qpus
            .iter()
            .map(|&id| (id, CalibrationState::new(&policy, now)))
            .collect();
        Ok(CalibrationService { policy, states })
    }

    pub fn state(&self, qpu: QpuId) -> Option<&CalibrationState> {
        self.states.get(&qpu)
    }

    /// Earliest pending check across processors.
    pub fn next_check(&self) -> Option<u64> {
        self.states.values().map(|s| s.next_check_time).min()
    }

    /// Runs the check for `qpu` if it is due at `now`. A calibration task is
    /// produced when something is flagged and none is already outstanding.
    pub fn check(
        &mut self,
        qpu: &QpuModel,
        now: u64,
        next_id: impl FnOnce() -> TaskId,
    ) -> Option<CheckOutcome> {
        let policy = &self.policy;
        let state = self.states.get_mut(&qpu.id)?;
        if now < state.next_check_time {
            return None;
        }
        let below = check_fidelities(qpu, policy);
        let mut flagged: BTreeSet<Flag> = below.iter().copied().collect();
        let horizon = (policy.interval_max + policy.calib_duration * qpu.n_qubits() as u64) as f64;
        let (mut min_single, mut min_two, mut min_measure) = (1.0f64, 1.0f64, 1.0f64);
        for (e, f) in qpu.fidelity_rows() {
            match e.class() {
                ElementClass::Single => min_single = min_single.min(f),
                ElementClass::Two => min_two = min_two.min(f),
                ElementClass::Measure => min_measure = min_measure.min(f),
            }
            if let Some(&(t0, f0)) = state.last_seen.get(&e) {
                if now > t0 {
                    let rate = ((f0 - f) / (now - t0) as f64).max(0.0);
                    state.slope.insert(e, rate);
                }
            }
            state.last_seen.insert(e, (now, f));
            if policy.lookahead {
                let rate = state.slope.get(&e).copied().unwrap_or(0.0);
                if f - rate * horizon < policy.threshold(e.class()) {
                    flagged.insert(flag_of(e));
                }
            }
        }
        let flagged: Vec<Flag> = flagged.into_iter().collect();
        let triggered = !flagged.is_empty();
        update_interval(state, policy, triggered);
        state.next_check_time = now + state.current_interval;
        state.flagged = flagged.clone();
        let task = if triggered && !state.pending {
            let (batch, rest) = split_batch(qpu, &flagged, policy);
            state.deferred = rest;
            state.pending = true;
            Some(
                build_calibration_task(qpu, &batch, policy, now, next_id())
                    .expect("batch is non-empty"),
            )
        } else {
            None
        };
        Some(CheckOutcome {
            time: now,
            qpu: qpu.id,
            below,
            flagged,
            interval: state.current_interval,
            min_single,
            min_two,
            min_measure,
            task,
        })
    }

    /// Called once restoration finished: restored elements restart their
    /// trend. Returns the follow-up task for flags that did not fit in the
    /// finished one.
    pub fn on_calibrated(
        &mut self,
        qpu: &QpuModel,
        restored: &[(Element, f64)],
        now: u64,
        next_id: impl FnOnce() -> TaskId,
    ) -> Option<QuantumTask> {
        let policy = &self.policy;
        let state = self.states.get_mut(&qpu.id)?;
        state.pending = false;
        for (e, _) in restored {
            state.last_seen.remove(e);
        }
        if state.deferred.is_empty() {
            return None;
        }
        let deferred = std::mem::take(&mut state.deferred);
        let (batch, rest) = split_batch(qpu, &deferred, policy);
        state.deferred = rest;
        state.pending = true;
        Some(
            build_calibration_task(qpu, &batch, policy, now, next_id())
                .expect("batch is non-empty"),
        )
    }
}

/// Most urgent flags first (smallest margin to threshold), as many as fit in
/// `max_targets` qubits; returns the batch and the remainder.
fn split_batch(
    qpu: &QpuModel,
    flagged: &[Flag],
    policy: &CalibrationPolicy,
) -> (Vec<Flag>, Vec<Flag>) {
    let Some(cap) = policy.max_targets else {
        return (flagged.to_vec(), Vec::new());
    };
    let margin = |f: &Flag| -> f64 {
        let elements = match *f {
            Flag::Qubit(q) => vec![Element::Single(q), Element::Measure(q)],
            Flag::Edge(a, b) => vec![Element::Two(a, b)],
        };
        elements
            .into_iter()
            .filter_map(|e| {
                qpu.element_fidelity(e)
                    .map(|v| v - policy.threshold(e.class()))
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut order: Vec<Flag> = flagged.to_vec();
    order.sort_by(|a, b| margin(a).total_cmp(&margin(b)).then(a.cmp(b)));
    let (mut batch, mut rest) = (Vec::new(), Vec::new());
    let mut targets = BTreeSet::new();
    for f in order {
        let mut grown = targets.clone();
        grown.extend(calibration_targets(&[f]));
        if grown.len() <= cap {
            targets = grown;
            batch.push(f);
        } else {
            rest.push(f);
        }
    }
    batch.sort();
    rest.sort();
    (batch, rest)
}

impl CalibrationService {
    /// Flags waiting for a follow-up task on `qpu`.
    pub fn deferred(&self, qpu: QpuId) -> &[Flag] {
        self.states.get(&qpu).map_or(&[], |s| &s.deferred)
    }
}
