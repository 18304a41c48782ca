use std::collections::{BTreeMap, BTreeSet};

use super::config::Scenario;
use super::report::{
    rejected_records, CalibrationRecord, CheckRecord, FidelitySample, QualitySample, Report,
    TaskRecord, WindowCount,
};
use super::HarnessError;
use crate::calibration::CalibrationService;
use crate::circuit::{Circuit, Gate};
use crate::mapper::{map_circuit_on, MappedCircuit};
use crate::noisy_sim::{simulate_noisy, Distribution, NoiseSpec, SimError};
use crate::qpu::{ElementClass, QpuModel};
use crate::scheduler::{Event, QuantumTask, Scheduler, TaskId, TaskType};

/// Noisy simulation of a mapped circuit restricted to the qubits it uses;
/// the distribution is labelled with physical qubits. Returns the trace error too.
pub fn simulate_mapped(m: &MappedCircuit, qpu: &QpuModel) -> Result<(Distribution, f64), SimError> {
    let physical: Vec<usize> = m.footprint().into_iter().collect();
    let index: BTreeMap<usize, usize> = physical.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut c = Circuit::new(physical.len());
    for g in &m.circuit.gates {
        let qubits: Vec<usize> = g.qubits.iter().map(|q| index[q]).collect();
        c.push(Gate::new(g.kind, qubits, g.params.clone()));
    }
    let noise = restricted_noise(qpu, &physical);
    let out = simulate_noisy(&c, &noise)?;
    let mut dist = out.distribution;
    dist.qubits = dist.qubits.iter().map(|&i| physical[i]).collect();
    Ok((dist, out.max_trace_error))
}

/// Error probabilities of `physical` (in order), relabelled `0..len`.
pub fn restricted_noise(qpu: &QpuModel, physical: &[usize]) -> NoiseSpec {
    let mut two = Vec::new();
    for (i, &a) in physical.iter().enumerate() {
        for (j, &b) in physical.iter().enumerate().skip(i + 1) {
            if let Some(f) = qpu.two_fidelity(a, b) {
                two.push(((i, j), 1.0 - f));
            }
        }
    }
    NoiseSpec {
        single: physical
            .iter()
            .map(|&q| 1.0 - qpu.single_fidelity(q))
            .collect(),
        two,
        measure: physical
            .iter()
            .map(|&q| 1.0 - qpu.measure_fidelity(q))
            .collect(),
    }
}

fn joined(qubits: impl IntoIterator<Item = usize>) -> String {
    qubits
        .into_iter()
        .map(|q| q.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn sample_quality(
    qpus: &[QpuModel],
    t: u64,
    reference: Option<&Circuit>,
    beam: usize,
    report: &mut Report,
) {
    for q in qpus {
        let (mut s, mut two, mut m) = (1.0f64, 1.0f64, 1.0f64);
        for (e, v) in q.fidelity_rows() {
            match e.class() {
                ElementClass::Single => s = s.min(v),
                ElementClass::Two => two = two.min(v),
                ElementClass::Measure => m = m.min(v),
            }
            report.fidelity.push(FidelitySample {
                timestamp: t,
                qpu: q.id.0,
                element: e.to_string(),
                value: v,
            });
        }
        let all: BTreeSet<usize> = (0..q.n_qubits()).collect();
        let reference_score = reference
            .and_then(|c| map_circuit_on(c, q, &all, beam).ok())
            .map(|m| m.fidelity_score);
        report.quality.push(QualitySample {
            timestamp: t,
            qpu: q.id.0,
            min_single: s,
            min_two: two,
            min_measure: m,
            reference_score,
        });
    }
}

/// Discrete-event run. At each instant the order is: completions, drift,
/// calibration checks, trace sampling, arrivals, then one scheduling pass.
/// After the duration only completions and scheduling continue; whatever
/// is still waiting once the processors go quiet is rejected.
pub fn run_scenario(s: &Scenario) -> Result<Report, HarnessError> {
    s.validate()?;
    let duration = s.duration as u64;
    let mut qpus = s.build_qpus()?;
    let templates = s.template_circuits()?;
    let reference = s.reference_circuit()?.map(|(_, c)| c);
    let arrivals = s.arrivals();
    let policy = &s.policy;
    let mut sched = Scheduler::new(policy.scheduler_policy(), &qpus);
    let ids: Vec<_> = qpus.iter().map(|q| q.id).collect();
    let mut service = if policy.calibration {
        Some(CalibrationService::new(s.calibration.clone(), &ids, 0)?)
    } else {
        None
    };
    let mut report = Report::empty(&s.name, s.seed, duration);
    let mut next_id = arrivals.len() as u64;
    let mut fresh_id = || {
        let id = TaskId(next_id);
        next_id += 1;
        id
    };

    let mut arrival = 0usize;
    let mut last_drift = 0u64;
    let mut next_drift = policy.drift_step;
    let mut next_trace = 0u64;
    let mut max_trace_error: f64 = 0.0;

    loop {
        let in_window = |t: u64| t <= duration;
        let mut next: Vec<u64> = Vec::new();
        if let Some((t, _)) = sched.next_completion() {
            next.push(t);
        }
        if let Some(&t) = arrivals.get(arrival) {
            next.push(t);
        }
        next.push(next_drift);
        next.push(next_trace);
        if let Some(svc) = &service {
            next.extend(svc.next_check());
        }
        let Some(t) = next
            .into_iter()
            .filter(|&t| in_window(t) || sched.next_completion().is_some_and(|(c, _)| c == t))
            .min()
        else {
            break;
        };
        let live = in_window(t);

        // Completions.
        while let Some((end, txn)) = sched.next_completion() {
            if end != t {
                break;
            }
            let qpu_id = sched.running_transaction(txn).expect("running").qpu_id;
            let qidx = qpus
                .iter()
                .position(|q| q.id == qpu_id)
                .expect("known processor");
            let mut results = BTreeMap::new();
            if policy.simulate_results {
                let run = sched.running_transaction(txn).expect("running");
                let start = sched
                    .running_threads()
                    .find(|th| th.transaction_id == txn)
                    .map(|th| th.start_time)
                    .expect("running");
                for m in &run.members {
                    if start + m.task.est_runtime != t {
                        continue;
                    }
                    if let Some(mapped) = &m.mapped {
                        let (d, err) = simulate_mapped(mapped, &qpus[qidx])?;
                        max_trace_error = max_trace_error.max(err);
                        results.insert(m.task.id, d);
                    }
                }
            }
            let done = sched.complete_thread(txn, results, t, &mut qpus, &s.calibration)?;
            if !done.calibrated.is_empty() {
                let cal_task = done
                    .completed
                    .iter()
                    .find(|c| c.task_type == TaskType::Calibration)
                    .map_or(0, |c| c.id.0);
                report.calibrations.push(CalibrationRecord {
                    time: t,
                    qpu: done.thread.qpu_id.0,
                    task: cal_task,
                    targets: joined(done.calibrated.iter().copied()),
                    restored: done.restored.len(),
                    min_restored: done.restored.iter().map(|(_, v)| *v).fold(1.0, f64::min),
                });
                sched.record(Event::Calibrated {
                    time: t,
                    qpu: done.thread.qpu_id,
                    targets: done.calibrated.iter().copied().collect(),
                });
                if let Some(svc) = service.as_mut() {
                    if let Some(task) =
                        svc.on_calibrated(&qpus[qidx], &done.restored, t, &mut fresh_id)
                    {
                        sched.submit_task(task)?;
                    }
                }
            }
        }

        if live {
            if next_drift == t {
                for q in qpus.iter_mut() {
                    q.apply_drift((t - last_drift) as i64)?;
                }
                last_drift = t;
                next_drift += policy.drift_step;
            }
            if let Some(svc) = service.as_mut() {
                for q in &qpus {
                    if let Some(out) = svc.check(q, t, &mut fresh_id) {
                        let flagged: Vec<String> =
                            out.flagged.iter().map(|f| f.to_string()).collect();
                        sched.record(Event::CalibrationCheck {
                            time: t,
                            qpu: q.id,
                            flagged: flagged.clone(),
                            interval: out.interval,
                        });
                        report.checks.push(CheckRecord {
                            time: t,
                            qpu: q.id.0,
                            interval: out.interval,
                            below: out.below.len(),
                            flagged: flagged.join(" "),
                            min_single: out.min_single,
                            min_two: out.min_two,
                            min_measure: out.min_measure,
                            task: out.task.as_ref().map(|x| x.id.0),
                        });
                        if let Some(task) = out.task {
                            sched.submit_task(task)?;
                        }
                    }
                }
            }
            if next_trace == t {
                sample_quality(&qpus, t, reference.as_ref(), policy.beam, &mut report);
                next_trace += policy.trace_interval;
            }
            while arrivals.get(arrival) == Some(&t) {
                let (_, program) = &templates[arrival % templates.len()];
                let task =
                    QuantumTask::general(TaskId(arrival as u64), program.clone(), t, &s.timing)?;
                sched.submit_task(task)?;
                report.submitted += 1;
                arrival += 1;
            }
        }
        sched.schedule_tick(&mut qpus, t)?;
    }

    let end = sched.clock().max(duration);
    sched.reject_all_waiting(end, "still waiting when the run ended");

    report.tasks = sched
        .completed()
        .iter()
        .map(|c| TaskRecord {
            id: c.id.0,
            kind: c.task_type,
            qubits: c.n_qubits,
            qpu: c.qpu_id.0,
            transaction: c.transaction_id,
            submit: c.submit_time,
            start: c.start_time,
            end: c.end_time,
            fidelity_score: c.fidelity_score,
            footprint: joined(c.footprint.iter().copied()),
        })
        .collect();
    report.rejected = rejected_records(sched.rejected());
    report.makespan = report.general_tasks().map(|t| t.end).max().unwrap_or(0);
    let window = policy.throughput_window;
    let horizon = end.max(report.makespan);
    let n_windows = horizon.div_ceil(window).max(1);
    report.throughput = (0..n_windows)
        .map(|k| {
            let (lo, hi) = (k * window, (k + 1) * window);
            WindowCount {
                start: lo,
                end: hi,
                completed: report
                    .general_tasks()
                    .filter(|t| t.end >= lo && t.end < hi)
                    .count() as u64,
            }
        })
        .collect();
    if report.submitted == 0 {
        report.throughput.clear();
    }
    report.events = sched.events().to_vec();
    report.max_trace_error = max_trace_error;
    Ok(report)
}
