//! Multi-processor task scheduling: highest-response-ratio-next for general
//! work, first-come-first-served precedence for calibration, transaction
//! formation on disjoint qubit footprints, thread binding and completion.

mod task;

pub use task::{
    CompletedTask, Event, Member, QuantumTask, QuantumThread, QuantumTransaction, RejectedTask,
    TaskId, TaskType, Timing,
};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{apply_calibration, CalibrationError, CalibrationPolicy};
use crate::circuit::write_circuit;
use crate::mapper::{map_circuit_on, MapError, MappedCircuit, DEFAULT_BEAM};
use crate::noisy_sim::Distribution;
use crate::qpu::{AllocationRefusal, Element, QpuError, QpuId, QpuModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error("task {0} was already submitted")]
    DuplicateId(TaskId),
    #[error("calibration task {0} has no explicit qubits")]
    MissingExplicitQubits(TaskId),
    #[error("calibration task {0} has no processor id")]
    MissingQpu(TaskId),
    #[error("task {task} names unknown processor {qpu}")]
    UnknownQpu { task: TaskId, qpu: QpuId },
    #[error("task {task} needs {needed} qubits but the largest processor has {largest}")]
    TooLarge {
        task: TaskId,
        needed: usize,
        largest: usize,
    },
    #[error("task {0} has a zero runtime estimate")]
    ZeroRuntime(TaskId),
    #[error("task {0} requires no qubits")]
    NoQubits(TaskId),
    #[error("task {task}: program has {program} qubits but {declared} are declared")]
    WidthMismatch {
        task: TaskId,
        program: usize,
        declared: usize,
    },
    #[error("time {now} precedes submission at {submit}")]
    BeforeSubmit { now: u64, submit: u64 },
    #[error("task {task} does not fit on {qpu}: {reason}")]
    SeedDoesNotFit {
        task: TaskId,
        qpu: QpuId,
        reason: String,
    },
    #[error("{0} is already running a thread")]
    QpuBusy(QpuId),
    #[error("no processor with id {0}")]
    NoSuchQpu(QpuId),
    #[error("no running thread for transaction {0}")]
    UnknownThread(u64),
    #[error("result for {task} does not belong to transaction {transaction}")]
    UnknownResult { transaction: u64, task: TaskId },
    #[error(transparent)]
    Allocation(#[from] AllocationRefusal),
    #[error(transparent)]
    Qpu(#[from] QpuError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Map(#[from] MapError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerPolicy {
    /// Beam width of every trial mapping.
    pub beam: usize,
    /// Upper bound on members per transaction (calibration members included).
    pub max_tasks_per_transaction: usize,
    /// A placement scoring below this is treated as not fitting.
    pub min_task_fidelity: f64,
    /// General tasks still waiting this long after submission are rejected.
    pub task_timeout: Option<u64>,
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        SchedulerPolicy {
            beam: DEFAULT_BEAM,
            max_tasks_per_transaction: 8,
            min_task_fidelity: 0.5,
            task_timeout: None,
        }
    }
}

/// HRRN response ratio `(waiting + runtime) / runtime`.
pub fn response_ratio(task: &QuantumTask, now: u64) -> Result<f64, SchedulerError> {
    if now < task.submit_time {
        return Err(SchedulerError::BeforeSubmit {
            now,
            submit: task.submit_time,
        });
    }
    if task.est_runtime == 0 {
        return Err(SchedulerError::ZeroRuntime(task.id));
    }
    let waiting = (now - task.submit_time) as f64;
    let run = task.est_runtime as f64;
    Ok((waiting + run) / run)
}

/// Dispatch order: higher ratio first (compared exactly), then earlier
/// submission, then smaller id. Both tasks must be submitted by `now`.
pub fn hrrn_cmp(a: &QuantumTask, b: &QuantumTask, now: u64) -> Ordering {
    let num = |t: &QuantumTask| (now - t.submit_time + t.est_runtime) as u128;
    let lhs = num(a) * b.est_runtime as u128;
    let rhs = num(b) * a.est_runtime as u128;
    rhs.cmp(&lhs)
        .then(a.submit_time.cmp(&b.submit_time))
        .then(a.id.cmp(&b.id))
}

/// Outcome of finishing the members of a thread that were due.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub thread: QuantumThread,
    pub completed: Vec<CompletedTask>,
    /// The thread's last member finished and the thread is gone.
    pub finished: bool,
    /// Calibrated qubits and the restored element values.
    pub calibrated: BTreeSet<usize>,
    pub restored: Vec<(Element, f64)>,
}

#[derive(Clone, Debug)]
struct Running {
    thread: QuantumThread,
    txn: QuantumTransaction,
    finished: BTreeSet<TaskId>,
}

impl Running {
    fn has_calibration(&self) -> bool {
        self.txn.members.iter().any(|m| m.task.is_calibration())
    }

    /// Unfinished members with their end times.
    fn pending(&self) -> impl Iterator<Item = (&Member, u64)> {
        self.txn
            .members
            .iter()
            .filter(|m| !self.finished.contains(&m.task.id))
            .map(|m| (m, self.thread.start_time + m.task.est_runtime))
    }
}

type TrialKey = (String, Vec<usize>, usize);
type TrialCache = HashMap<TrialKey, Result<MappedCircuit, MapError>>;

#[derive(Debug)]
pub struct Scheduler {
    pub policy: SchedulerPolicy,
    widths: BTreeMap<QpuId, usize>,
    waiting: Vec<QuantumTask>,
    calibration_queue: VecDeque<QuantumTask>,
    running: BTreeMap<u64, Running>,
    completed: Vec<CompletedTask>,
    rejected: Vec<RejectedTask>,
    seen: BTreeSet<TaskId>,
    events: Vec<Event>,
    clock: u64,
    next_transaction: u64,
    /// Processors held back for a queued calibration.
    reserved: BTreeSet<QpuId>,
    cache: HashMap<QpuId, (u64, TrialCache)>,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, qpus: &[QpuModel]) -> Self {
        Scheduler {
            policy,
            widths: qpus.iter().map(|q| (q.id, q.n_qubits())).collect(),
            waiting: Vec::new(),
            calibration_queue: VecDeque::new(),
            running: BTreeMap::new(),
            completed: Vec::new(),
            rejected: Vec::new(),
            seen: BTreeSet::new(),
            events: Vec::new(),
            clock: 0,
            next_transaction: 0,
            reserved: BTreeSet::new(),
            cache: HashMap::new(),
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn waiting(&self) -> &[QuantumTask] {
        &self.waiting
    }

    pub fn calibration_queue(&self) -> impl Iterator<Item = &QuantumTask> {
        self.calibration_queue.iter()
    }

    pub fn running_threads(&self) -> impl Iterator<Item = &QuantumThread> {
        self.running.values().map(|r| &r.thread)
    }

    pub fn running_transaction(&self, id: u64) -> Option<&QuantumTransaction> {
        self.running.get(&id).map(|r| &r.txn)
    }

    pub fn completed(&self) -> &[CompletedTask] {
        &self.completed
    }

    pub fn rejected(&self) -> &[RejectedTask] {
        &self.rejected
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Appends an externally produced record (checks, calibrations) to the log.
    pub fn record(&mut self, e: Event) {
        self.events.push(e);
    }

    /// Some thread is running on `qpu`.
    pub fn is_running(&self, qpu: QpuId) -> bool {
        self.running.values().any(|r| r.thread.qpu_id == qpu)
    }

    /// A thread without calibration members is running on `qpu`.
    pub fn general_thread_on(&self, qpu: QpuId) -> bool {
        self.running
            .values()
            .any(|r| r.thread.qpu_id == qpu && !r.has_calibration())
    }

    /// A thread with a calibration member is running on `qpu`.
    pub fn calibration_thread_on(&self, qpu: QpuId) -> bool {
        self.running
            .values()
            .any(|r| r.thread.qpu_id == qpu && r.has_calibration())
    }

    /// Anything waiting or running.
    pub fn has_work(&self) -> bool {
        !self.waiting.is_empty() || !self.calibration_queue.is_empty() || !self.running.is_empty()
    }

    /// Earliest end of an unfinished member, with its transaction id.
    pub fn next_completion(&self) -> Option<(u64, u64)> {
        self.running
            .values()
            .flat_map(|r| r.pending().map(|(_, end)| (end, r.thread.transaction_id)))
            .min()
    }

    pub fn submit_task(&mut self, task: QuantumTask) -> Result<TaskId, SchedulerError> {
        let id = task.id;
        if self.seen.contains(&id) {
            return Err(SchedulerError::DuplicateId(id));
        }
        if task.est_runtime == 0 {
            return Err(SchedulerError::ZeroRuntime(id));
        }
        let largest = match task.qpu_id {
            Some(q) => *self
                .widths
                .get(&q)
                .ok_or(SchedulerError::UnknownQpu { task: id, qpu: q })?,
            None => self.widths.values().copied().max().unwrap_or(0),
        };
        if task.is_calibration() {
            let targets = task
                .explicit_qubits
                .as_ref()
                .ok_or(SchedulerError::MissingExplicitQubits(id))?;
            if task.qpu_id.is_none() {
                return Err(SchedulerError::MissingQpu(id));
            }
            if let Some(&q) = targets.iter().find(|&&q| q >= largest) {
                return Err(QpuError::NoSuchQubit(q).into());
            }
        } else {
            if task.n_qubits_required == 0 {
                return Err(SchedulerError::NoQubits(id));
            }
            if task.program.n_qubits != task.n_qubits_required {
                return Err(SchedulerError::WidthMismatch {
                    task: id,
                    program: task.program.n_qubits,
                    declared: task.n_qubits_required,
                });
            }
        }
        if task.n_qubits_required > largest {
            return Err(SchedulerError::TooLarge {
                task: id,
                needed: task.n_qubits_required,
                largest,
            });
        }
        self.seen.insert(id);
        self.events.push(Event::Submit {
            time: task.submit_time,
            task: id,
            kind: task.task_type,
            qubits: task.n_qubits_required,
            est_runtime: task.est_runtime,
        });
        if task.is_calibration() {
            self.calibration_queue.push_back(task);
        } else {
            self.waiting.push(task);
        }
        Ok(id)
    }

    /// Waiting general tasks in dispatch-priority order at `now`.
    pub fn hrrn_order(&self, now: u64) -> Vec<TaskId> {
        let mut w: Vec<&QuantumTask> = self
            .waiting
            .iter()
            .filter(|t| t.submit_time <= now)
            .collect();
        w.sort_by(|a, b| hrrn_cmp(a, b, now));
        w.into_iter().map(|t| t.id).collect()
    }

    fn trial_map(
        &mut self,
        task: &QuantumTask,
        qpu: &QpuModel,
        allowed: &BTreeSet<usize>,
    ) -> Result<MappedCircuit, MapError> {
        let beam = self.policy.beam;
        let entry = self
            .cache
            .entry(qpu.id)
            .or_insert_with(|| (qpu.epoch(), HashMap::new()));
        if entry.0 != qpu.epoch() {
            *entry = (qpu.epoch(), HashMap::new());
        }
        let key = (
            write_circuit(&task.program),
            allowed.iter().copied().collect(),
            beam,
        );
        entry
            .1
            .entry(key)
            .or_insert_with(|| map_circuit_on(&task.program, qpu, allowed, beam))
            .clone()
    }

    /// A mapping of `task` onto `allowed` that meets the fidelity floor.
    fn fit(
        &mut self,
        task: &QuantumTask,
        qpu: &QpuModel,
        allowed: &BTreeSet<usize>,
    ) -> Result<MappedCircuit, String> {
        if allowed.len() < task.n_qubits_required {
            return Err(format!(
                "needs {} qubits, {} available",
                task.n_qubits_required,
                allowed.len()
            ));
        }
        let m = self
            .trial_map(task, qpu, allowed)
            .map_err(|e| e.to_string())?;
        if m.fidelity_score < self.policy.min_task_fidelity {
            return Err(format!(
                "best mapping scores {:.6}, below the floor {}",
                m.fidelity_score, self.policy.min_task_fidelity
            ));
        }
        Ok(m)
    }

    /// Among idle, unreserved processors that can host the task, the one whose
    /// trial mapping scores highest (ties to the smaller id).
    pub fn select_qpu(&mut self, task: &QuantumTask, qpus: &[QpuModel]) -> Option<QpuId> {
        self.select_with_mapping(task, qpus).map(|(id, _)| id)
    }

    fn select_with_mapping(
        &mut self,
        task: &QuantumTask,
        qpus: &[QpuModel],
    ) -> Option<(QpuId, MappedCircuit)> {
        let mut best: Option<(QpuId, MappedCircuit)> = None;
        for qpu in qpus {
            if task.qpu_id.is_some_and(|q| q != qpu.id)
                || self.general_thread_on(qpu.id)
                || self.reserved.contains(&qpu.id)
            {
                continue;
            }
            let Ok(m) = self.fit(task, qpu, &qpu.available_qubits()) else {
                continue;
            };
            if best
                .as_ref()
                .is_none_or(|(_, b)| m.fidelity_score > b.fidelity_score)
            {
                best = Some((qpu.id, m));
            }
        }
        best
    }

    /// Builds a transaction around `seed`, then greedily adds `candidates`
    /// (already in priority order) mapped onto the qubits still unclaimed.
    /// Nothing on the processor changes until [`Scheduler::bind_thread`].
    pub fn form_transaction(
        &mut self,
        seed: &QuantumTask,
        candidates: &[QuantumTask],
        qpu: &QpuModel,
    ) -> Result<QuantumTransaction, SchedulerError> {
        let refuse = |reason: String| SchedulerError::SeedDoesNotFit {
            task: seed.id,
            qpu: qpu.id,
            reason,
        };
        if seed.qpu_id.is_some_and(|q| q != qpu.id) {
            return Err(refuse("task is bound to another processor".into()));
        }
        let mut free = qpu.available_qubits();
        let mut members = Vec::new();
        if seed.is_calibration() {
            let targets = seed
                .explicit_qubits
                .clone()
                .ok_or(SchedulerError::MissingExplicitQubits(seed.id))?;
            if !targets.is_subset(&free) {
                return Err(refuse(format!("targets {targets:?} are not all free")));
            }
            free.retain(|q| !targets.contains(q));
            members.push(Member {
                task: seed.clone(),
                footprint: targets,
                mapped: None,
            });
        } else {
            let m = self.fit(seed, qpu, &free).map_err(refuse)?;
            let fp = m.footprint();
            free.retain(|q| !fp.contains(q));
            members.push(Member {
                task: seed.clone(),
                footprint: fp,
                mapped: Some(m),
            });
        }
        for cand in candidates {
            if members.len() >= self.policy.max_tasks_per_transaction {
                break;
            }
            if cand.id == seed.id
                || cand.is_calibration()
                || cand.qpu_id.is_some_and(|q| q != qpu.id)
            {
                continue;
            }
            if let Ok(m) = self.fit(cand, qpu, &free) {
                let fp = m.footprint();
                free.retain(|q| !fp.contains(q));
                members.push(Member {
                    task: cand.clone(),
                    footprint: fp,
                    mapped: Some(m),
                });
            }
        }
        let mut footprint = BTreeSet::new();
        for m in &members {
            assert!(
                m.footprint.is_disjoint(&footprint),
                "overlapping member footprints"
            );
            footprint.extend(m.footprint.iter().copied());
        }
        let id = self.next_transaction;
        self.next_transaction += 1;
        Ok(QuantumTransaction {
            id,
            qpu_id: qpu.id,
            members,
            footprint,
        })
    }

    /// Claims the transaction's qubits (calibration members move into the
    /// calibration region) and starts its thread. All-or-nothing.
    ///
    /// A processor runs one thread at a time, except that a thread carrying
    /// calibration may overlap one general thread: the two hold disjoint
    /// regions of the chip.
    pub fn bind_thread(
        &mut self,
        txn: QuantumTransaction,
        qpu: &mut QpuModel,
        now: u64,
    ) -> Result<QuantumThread, SchedulerError> {
        if qpu.id != txn.qpu_id {
            return Err(SchedulerError::NoSuchQpu(txn.qpu_id));
        }
        let targets = txn.calibration_targets();
        let busy = if targets.is_empty() {
            self.general_thread_on(qpu.id)
        } else {
            self.calibration_thread_on(qpu.id)
        };
        if busy {
            return Err(SchedulerError::QpuBusy(qpu.id));
        }
        let general: BTreeSet<usize> = txn.footprint.difference(&targets).copied().collect();
        if !targets.is_empty() {
            qpu.partition_regions(&targets)?;
        }
        if let Err(refusal) = qpu.allocate_qubits(&general) {
            if !targets.is_empty() {
                qpu.release_qubits(&targets)
                    .expect("targets were just partitioned");
            }
            return Err(refusal.into());
        }
        let thread = QuantumThread {
            transaction_id: txn.id,
            qpu_id: qpu.id,
            task_ids: txn.task_ids(),
            start_time: now,
            expected_end: now + txn.duration(),
        };
        let dispatched: BTreeSet<TaskId> = thread.task_ids.iter().copied().collect();
        self.waiting.retain(|t| !dispatched.contains(&t.id));
        self.calibration_queue
            .retain(|t| !dispatched.contains(&t.id));
        self.events.push(Event::Dispatch {
            time: now,
            transaction: txn.id,
            qpu: qpu.id,
            tasks: thread.task_ids.clone(),
            footprint: txn.footprint.iter().copied().collect(),
            calibration_region: qpu.calibration_region().iter().copied().collect(),
            expected_end: thread.expected_end,
        });
        self.running.insert(
            txn.id,
            Running {
                thread: thread.clone(),
                txn,
                finished: BTreeSet::new(),
            },
        );
        Ok(thread)
    }

    fn reject_expired(&mut self, now: u64) {
        let Some(timeout) = self.policy.task_timeout else {
            return;
        };
        let (expired, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.waiting)
            .into_iter()
            .partition(|t| now.saturating_sub(t.submit_time) > timeout);
        self.waiting = keep;
        for t in expired {
            self.reject(t.id, now, format!("waited longer than {timeout} s"));
        }
    }

    fn reject(&mut self, id: TaskId, now: u64, reason: String) {
        self.events.push(Event::Reject {
            time: now,
            task: id,
            reason: reason.clone(),
        });
        self.rejected.push(RejectedTask {
            id,
            time: now,
            reason,
        });
    }

    /// Rejects everything still queued (end of a run).
    pub fn reject_all_waiting(&mut self, now: u64, reason: &str) {
        let mut left: Vec<QuantumTask> = std::mem::take(&mut self.waiting);
        left.extend(std::mem::take(&mut self.calibration_queue));
        left.sort_by_key(|t| t.id);
        for t in left {
            self.reject(t.id, now, reason.to_string());
        }
    }

    fn general_candidates(&self, now: u64) -> Vec<QuantumTask> {
        let mut c: Vec<QuantumTask> = self
            .waiting
            .iter()
            .filter(|t| t.submit_time <= now)
            .cloned()
            .collect();
        c.sort_by(|a, b| hrrn_cmp(a, b, now));
        c
    }

    /// One scheduling pass. Queued calibrations go first, each on its own
    /// processor as soon as that processor is idle; then general tasks in
    /// response-ratio order fill the remaining idle processors.
    pub fn schedule_tick(
        &mut self,
        qpus: &mut [QpuModel],
        now: u64,
    ) -> Result<Vec<QuantumThread>, SchedulerError> {
        self.clock = self.clock.max(now);
        self.reject_expired(now);
        let mut dispatched = Vec::new();

        self.reserved.clear();
        let queue: Vec<QuantumTask> = self.calibration_queue.iter().cloned().collect();
        for cal in queue {
            let qid = cal.qpu_id.ok_or(SchedulerError::MissingQpu(cal.id))?;
            let idx = qpu_index(qpus, qid)?;
            let targets_free = cal
                .explicit_qubits
                .as_ref()
                .is_some_and(|t| t.is_subset(&qpus[idx].available_qubits()));
            if self.reserved.contains(&qid)
                || self.calibration_thread_on(qid)
                || !targets_free
                || cal.submit_time > now
            {
                // Hold general work back so the targets drain.
                self.reserved.insert(qid);
                continue;
            }
            let candidates = self.general_candidates(now);
            let txn = self.form_transaction(&cal, &candidates, &qpus[idx])?;
            dispatched.push(self.bind_thread(txn, &mut qpus[idx], now)?);
        }

        loop {
            let candidates = self.general_candidates(now);
            let mut progressed = false;
            for (i, seed) in candidates.iter().enumerate() {
                let Some((qid, _)) = self.select_with_mapping(seed, qpus) else {
                    continue;
                };
                let idx = qpu_index(qpus, qid)?;
                let txn = self.form_transaction(seed, &candidates[i + 1..], &qpus[idx])?;
                dispatched.push(self.bind_thread(txn, &mut qpus[idx], now)?);
                progressed = true;
                break;
            }
            if !progressed {
                break;
            }
        }
        Ok(dispatched)
    }

    /// Finishes every member of the thread whose runtime has elapsed by
    /// `now`: hands it its result, restores calibrated elements, and frees
    /// the qubits it held. The thread ends with its last member.
    pub fn complete_thread(
        &mut self,
        transaction: u64,
        mut results: BTreeMap<TaskId, Distribution>,
        now: u64,
        qpus: &mut [QpuModel],
        calibration: &CalibrationPolicy,
    ) -> Result<Completion, SchedulerError> {
        let run = self
            .running
            .get(&transaction)
            .ok_or(SchedulerError::UnknownThread(transaction))?;
        let due: Vec<Member> = run
            .pending()
            .filter(|&(_, end)| end <= now)
            .map(|(m, _)| m.clone())
            .collect();
        if let Some(&task) = results
            .keys()
            .find(|id| !due.iter().any(|m| m.task.id == **id))
        {
            return Err(SchedulerError::UnknownResult { transaction, task });
        }
        let thread = run.thread.clone();
        let idx = qpu_index(qpus, thread.qpu_id)?;
        let qpu = &mut qpus[idx];

        let targets: BTreeSet<usize> = due
            .iter()
            .filter(|m| m.task.is_calibration())
            .flat_map(|m| m.footprint.iter().copied())
            .collect();
        let restored = if targets.is_empty() {
            Vec::new()
        } else {
            apply_calibration(qpu, &targets, calibration)?
        };
        let freed: BTreeSet<usize> = due
            .iter()
            .flat_map(|m| m.footprint.iter().copied())
            .collect();
        qpu.release_qubits(&freed)?;
        self.clock = self.clock.max(now);

        let completed: Vec<CompletedTask> = due
            .iter()
            .map(|m| CompletedTask {
                id: m.task.id,
                task_type: m.task.task_type,
                n_qubits: m.task.n_qubits_required,
                qpu_id: thread.qpu_id,
                transaction_id: transaction,
                submit_time: m.task.submit_time,
                start_time: thread.start_time,
                end_time: now,
                fidelity_score: m.mapped.as_ref().map_or(1.0, |x| x.fidelity_score),
                footprint: m.footprint.iter().copied().collect(),
                result: results.remove(&m.task.id),
            })
            .collect();
        let run = self.running.get_mut(&transaction).expect("checked above");
        run.finished.extend(due.iter().map(|m| m.task.id));
        let finished = run.finished.len() == run.txn.members.len();
        if finished {
            self.running.remove(&transaction);
        }
        self.completed.extend(completed.iter().cloned());
        self.events.push(Event::Complete {
            time: now,
            transaction,
            qpu: thread.qpu_id,
            tasks: completed.iter().map(|c| c.id).collect(),
        });
        Ok(Completion {
            thread,
            completed,
            finished,
            calibrated: targets,
            restored,
        })
    }
}

fn qpu_index(qpus: &[QpuModel], id: QpuId) -> Result<usize, SchedulerError> {
    qpus.iter()
        .position(|q| q.id == id)
        .ok_or(SchedulerError::NoSuchQpu(id))
}

/// Ordered submission channel for concurrent producers.
#[derive(Debug)]
pub struct Inbox {
    tx: mpsc::Sender<QuantumTask>,
    rx: mpsc::Receiver<QuantumTask>,
}

impl Default for Inbox {
    fn default() -> Self {
        let (tx, rx) = mpsc::channel();
        Inbox { tx, rx }
    }
}

impl Inbox {
    pub fn sender(&self) -> mpsc::Sender<QuantumTask> {
        self.tx.clone()
    }

    /// Submits everything received so far, ordered by submit time then id so
    /// the outcome does not depend on producer interleaving.
    pub fn drain_into(&self, s: &mut Scheduler) -> Vec<Result<TaskId, SchedulerError>> {
        let mut batch: Vec<QuantumTask> = self.rx.try_iter().collect();
        batch.sort_by_key(|t| (t.submit_time, t.id));
        batch.into_iter().map(|t| s.submit_task(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::build_calibration_task;
    use crate::calibration::Flag;
    use crate::circuit::{generate_benchmark, Benchmark, Circuit};
    use crate::qpu::{build_qpu, QpuSpec};

    fn qpu(id: usize) -> QpuModel {
        build_qpu(QpuId(id), &QpuSpec::uniform_grid(2, 4, 0.995, 0.99, 0.995)).unwrap()
    }

    fn ghz(id: u64, n: usize, submit: u64, run: u64) -> QuantumTask {
        let mut t = QuantumTask::general(
            TaskId(id),
            generate_benchmark(&Benchmark::Ghz, n).unwrap(),
            submit,
            &Timing::default(),
        )
        .unwrap();
        t.est_runtime = run;
        t
    }

    #[test]
    fn response_ratio_examples() {
        assert_eq!(response_ratio(&ghz(0, 2, 5, 10), 5).unwrap(), 1.0);
        assert_eq!(response_ratio(&ghz(0, 2, 5, 10), 15).unwrap(), 2.0);
        assert_eq!(response_ratio(&ghz(0, 2, 0, 10), 30).unwrap(), 4.0);
        assert!(response_ratio(&ghz(0, 2, 5, 10), 4).is_err());
    }

    #[test]
    fn submission_errors() {
        let q = [qpu(0)];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &q);
        s.submit_task(ghz(1, 2, 0, 6)).unwrap();
        assert_eq!(
            s.submit_task(ghz(1, 2, 0, 6)),
            Err(SchedulerError::DuplicateId(TaskId(1)))
        );
        let mut cal = build_calibration_task(
            &q[0],
            &[Flag::Qubit(3)],
            &CalibrationPolicy::default(),
            0,
            TaskId(2),
        )
        .unwrap();
        cal.explicit_qubits = None;
        assert!(matches!(
            s.submit_task(cal),
            Err(SchedulerError::MissingExplicitQubits(_))
        ));
        let big = QuantumTask::general(TaskId(3), Circuit::new(9), 0, &Timing::default()).unwrap();
        assert!(matches!(
            s.submit_task(big),
            Err(SchedulerError::TooLarge { .. })
        ));
    }

    #[test]
    fn higher_ratio_dispatches_first() {
        let mut q = [qpu(0)];
        let mut s = Scheduler::new(
            SchedulerPolicy {
                max_tasks_per_transaction: 1,
                ..Default::default()
            },
            &q,
        );
        s.submit_task(ghz(1, 2, 20, 10)).unwrap();
        s.submit_task(ghz(2, 2, 0, 10)).unwrap();
        assert_eq!(s.hrrn_order(30), vec![TaskId(2), TaskId(1)]);
        let th = s.schedule_tick(&mut q, 30).unwrap();
        assert_eq!(th.len(), 1);
        assert_eq!(th[0].task_ids, vec![TaskId(2)]);
    }

    #[test]
    fn calibration_goes_first_and_splits_regions() {
        let mut q = [qpu(0)];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &q);
        s.submit_task(ghz(1, 2, 0, 6)).unwrap();
        let cal = build_calibration_task(
            &q[0],
            &[Flag::Edge(0, 1)],
            &CalibrationPolicy::default(),
            0,
            TaskId(2),
        )
        .unwrap();
        s.submit_task(cal).unwrap();
        let th = s.schedule_tick(&mut q, 0).unwrap();
        assert_eq!(th.len(), 1);
        assert_eq!(th[0].task_ids, vec![TaskId(2), TaskId(1)]);
        assert_eq!(q[0].calibration_region(), &BTreeSet::from([0, 1]));
        let txn = s.running_transaction(th[0].transaction_id).unwrap();
        assert!(txn.members[1].footprint.is_disjoint(&[0, 1].into()));
        assert_eq!(th[0].expected_end, 600);
        let done = s
            .complete_thread(
                th[0].transaction_id,
                BTreeMap::new(),
                600,
                &mut q,
                &CalibrationPolicy::default(),
            )
            .unwrap();
        assert_eq!(done.completed.len(), 2);
        assert!(q[0].is_idle());
        assert!(q[0].calibration_region().is_empty());
    }

    #[test]
    fn two_small_tasks_share_a_transaction() {
        let mut q = [qpu(0)];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &q);
        s.submit_task(ghz(1, 2, 0, 6)).unwrap();
        s.submit_task(ghz(2, 2, 0, 6)).unwrap();
        let th = s.schedule_tick(&mut q, 0).unwrap();
        assert_eq!(th.len(), 1);
        let txn = s.running_transaction(th[0].transaction_id).unwrap();
        assert_eq!(txn.members.len(), 2);
        assert!(txn.members[0]
            .footprint
            .is_disjoint(&txn.members[1].footprint));
    }

    #[test]
    fn oversized_companion_stays_waiting() {
        let mut q = [qpu(0)];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &q);
        s.submit_task(ghz(1, 2, 0, 6)).unwrap();
        s.submit_task(ghz(2, 7, 1, 6)).unwrap();
        let th = s.schedule_tick(&mut q, 1).unwrap();
        assert_eq!(th[0].task_ids, vec![TaskId(1)]);
        assert_eq!(s.waiting().len(), 1);
    }

    #[test]
    fn binding_a_busy_processor_fails() {
        let mut q = [qpu(0)];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &q);
        s.submit_task(ghz(1, 2, 0, 6)).unwrap();
        s.schedule_tick(&mut q, 0).unwrap();
        let t = ghz(5, 2, 0, 6);
        let txn = s.form_transaction(&t, &[], &q[0]).unwrap();
        assert_eq!(
            s.bind_thread(txn, &mut q[0], 0),
            Err(SchedulerError::QpuBusy(QpuId(0)))
        );
    }

    #[test]
    fn unknown_thread_and_stray_results() {
        let mut q = [qpu(0)];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &q);
        let p = CalibrationPolicy::default();
        assert!(s
            .complete_thread(9, BTreeMap::new(), 0, &mut q, &p)
            .is_err());
        s.submit_task(ghz(1, 2, 0, 6)).unwrap();
        let th = s.schedule_tick(&mut q, 0).unwrap();
        let stray = BTreeMap::from([(
            TaskId(7),
            Distribution {
                qubits: vec![0],
                probs: vec![1.0, 0.0],
            },
        )]);
        assert!(matches!(
            s.complete_thread(th[0].transaction_id, stray, 6, &mut q, &p),
            Err(SchedulerError::UnknownResult { .. })
        ));
    }

    #[test]
    fn selects_the_better_processor() {
        let worse = build_qpu(QpuId(0), &QpuSpec::uniform_grid(2, 4, 0.95, 0.9, 0.95)).unwrap();
        let better = build_qpu(QpuId(1), &QpuSpec::uniform_grid(2, 4, 0.99, 0.97, 0.99)).unwrap();
        let qpus = [worse, better];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &qpus);
        assert_eq!(s.select_qpu(&ghz(1, 3, 0, 6), &qpus), Some(QpuId(1)));
    }

    #[test]
    fn inbox_orders_concurrent_submissions() {
        let q = [qpu(0)];
        let mut s = Scheduler::new(SchedulerPolicy::default(), &q);
        let inbox = Inbox::default();
        let handles: Vec<_> = (0..4u64)
            .map(|i| {
                let tx = inbox.sender();
                std::thread::spawn(move || tx.send(ghz(10 - i, 2, i % 2, 6)).unwrap())
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(inbox.drain_into(&mut s).iter().all(Result::is_ok));
        let ids: Vec<u64> = s.waiting().iter().map(|t| t.id.0).collect();
        assert_eq!(ids, vec![8, 10, 7, 9]);
    }
}
