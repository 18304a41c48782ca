//! Acceptance suite: one PASS/FAIL line per criterion, each within its
//! wall-clock budget. Exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    benchmark_circuits, connected_graphs, hrrn_dispatch_order, hrrn_oracle, kraus_oracle,
    optimal_swaps, permutations, prefix, random_circuit, random_hrrn_case, random_noise, rng,
};
use qkernel::calibration::CalibrationPolicy;
use qkernel::circuit::{decompose_to_native, Circuit};
use qkernel::harness::{
    calibration_experiment, calibration_scenario, mapping_experiment, perturbed_split_qpu,
    run_experiment, run_scenario, runtime_experiment, runtime_scenario, Format, EXPERIMENTS,
};
use qkernel::mapper::{map_circuit, map_naive, token_swap_route, Placement, DEFAULT_BEAM};
use qkernel::noisy_sim::{assert_equivalent, simulate_noisy};
use rand::Rng;

const SEED: u64 = 2024;

type Outcome = Result<String, String>;

/// Label, title, wall-clock budget in seconds, check.
type Criterion = (&'static str, &'static str, u64, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn hrrn_equivalence() -> Outcome {
    let mut r = rng(SEED);
    let mut tasks = 0;
    for case_no in 0..200 {
        let case = random_hrrn_case(&mut r);
        tasks += case.len();
        let got = hrrn_dispatch_order(&case);
        let want = hrrn_oracle(&case);
        check(got == want, || {
            format!("case {case_no} {case:?}: scheduler {got:?}, oracle {want:?}")
        })?;
    }
    Ok(format!("200 task sets, {tasks} dispatches identical"))
}

fn parallel_co_execution() -> Outcome {
    // Oracle: GHZ(2) in native form is U3 (H), U3·CZ·U3 (CNOT) and two
    // readouts, each step 1 ms × 1000 shots → 6 s. Makespan is the number of
    // waves of (processors × tasks per transaction) times that.
    let mut ghz = Circuit::new(2);
    ghz.h(0).cnot(0, 1).measure_all();
    let per_task = decompose_to_native(&ghz)
        .map_err(|e| e.to_string())?
        .gates
        .len() as f64;
    let oracle = |qpus: f64, per: f64| (10.0 / (qpus * per)).ceil() * per_task;

    let e = runtime_experiment(SEED).map_err(|e| e.to_string())?;
    let mean = |s: &str| e.mean(s).ok_or_else(|| format!("missing scenario {s}"));
    let (one, two, packed) = (
        mean("1circ-1qpu")?,
        mean("1circ-2qpu")?,
        mean("2circ-1qpu")?,
    );
    check(
        one == oracle(1.0, 1.0) && two == oracle(2.0, 1.0) && packed == oracle(1.0, 2.0),
        || {
            format!(
                "makespans {one}/{two}/{packed} differ from oracle {}/{}/{}",
                oracle(1.0, 1.0),
                oracle(2.0, 1.0),
                oracle(1.0, 2.0)
            )
        },
    )?;
    let ratio = one / two;
    check((1.8..=2.2).contains(&ratio), || {
        format!("1 vs 2 processors ratio {ratio}")
    })?;
    let packing = packed / one;
    check(packing <= 0.6, || format!("packed/serialized {packing}"))?;

    // The packed run really co-executes disjoint pairs on one processor.
    let r = run_scenario(&runtime_scenario(1, 2, SEED)).map_err(|e| e.to_string())?;
    let mut by_txn: std::collections::BTreeMap<u64, Vec<&str>> = Default::default();
    for t in &r.tasks {
        by_txn.entry(t.transaction).or_default().push(&t.footprint);
    }
    for (txn, fps) in &by_txn {
        check(fps.len() == 2, || {
            format!("transaction {txn} has {} members", fps.len())
        })?;
        let qs: Vec<&str> = fps.iter().flat_map(|f| f.split(' ')).collect();
        let mut dedup = qs.clone();
        dedup.sort();
        dedup.dedup();
        check(dedup.len() == qs.len(), || {
            format!("transaction {txn} footprints overlap: {fps:?}")
        })?;
    }
    Ok(format!(
        "ratio {ratio:.3}, packed/serialized {packing:.3} (makespans {one}/{two}/{packed} s)"
    ))
}

fn calibration_closed_loop() -> Outcome {
    let policy: CalibrationPolicy = calibration_scenario(true, SEED).calibration;
    let e = calibration_experiment(SEED).map_err(|e| e.to_string())?;
    let cross = |pred: &dyn Fn(&qkernel::harness::QualitySample) -> bool| {
        e.uncalibrated
            .quality
            .iter()
            .find(|q| pred(q))
            .map(|q| q.timestamp)
    };
    let single_cross = cross(&|q| q.min_single < policy.single_threshold);
    let two_cross = cross(&|q| q.min_two < policy.double_threshold);
    check(
        single_cross.is_some_and(|t| t <= 4 * 3600) && two_cross.is_some_and(|t| t <= 4 * 3600),
        || format!("uncalibrated drift crossings {single_cross:?}/{two_cross:?} not within 4 h"),
    )?;
    check(!e.calibrated.calibrations.is_empty(), || {
        "no calibration completed".into()
    })?;
    let violations = e.violations(&policy);
    check(violations.is_empty(), || {
        format!("checks below threshold after first calibration at {violations:?}")
    })?;
    let checked = e
        .calibrated
        .checks
        .iter()
        .filter(|c| c.time > e.calibrated.calibrations[0].time)
        .count();
    let crossing = e
        .crossing
        .ok_or("uncalibrated probe score never fell below 0.5")?;
    let ratio = e.calibrated_after as f64 / e.uncalibrated_after.max(1) as f64;
    check(ratio >= 1.5, || {
        format!(
            "after t={crossing}: calibrated {} vs uncalibrated {} completions (ratio {ratio:.3})",
            e.calibrated_after, e.uncalibrated_after
        )
    })?;
    Ok(format!(
        "{checked} checks all in bounds; uncalibrated crosses at {}/{} s; after score<0.5 (t={crossing}) {} vs {} tasks, ratio {ratio:.2}",
        single_cross.unwrap(),
        two_cross.unwrap(),
        e.calibrated_after,
        e.uncalibrated_after
    ))
}

fn mapping_fidelity_awareness() -> Outcome {
    let e = mapping_experiment(SEED).map_err(|e| e.to_string())?;
    let mut strict = 0;
    let mut parts = Vec::new();
    for s in &e.summary {
        check(s.aware_mean >= s.naive_mean, || {
            format!(
                "{}: aware {} < naive {}",
                s.benchmark, s.aware_mean, s.naive_mean
            )
        })?;
        strict += usize::from(s.aware_mean > s.naive_mean);
        parts.push(format!(
            "{} {:.3}>{:.3}",
            s.benchmark, s.aware_mean, s.naive_mean
        ));
    }
    check(strict >= 3, || format!("only {strict} strict wins"))?;
    check(e.max_trace_error < 1e-9, || {
        format!("trace error {}", e.max_trace_error)
    })?;
    Ok(format!("{strict}/4 strictly better: {}", parts.join(", ")))
}

fn mapped_semantics() -> Outcome {
    let mut r = rng(SEED);
    let qpu = perturbed_split_qpu(SEED).map_err(|e| e.to_string())?;
    let all = qpu.executable_region();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = r.random_range(3..=5);
        let len = r.random_range(1..=20);
        let c = random_circuit(&mut r, n, len);
        for m in [
            map_circuit(&c, &qpu, DEFAULT_BEAM).map_err(|e| e.to_string())?,
            map_naive(&c, &qpu, &all).map_err(|e| e.to_string())?,
        ] {
            let eq =
                assert_equivalent(&c, &m.circuit, &m.final_layout).map_err(|e| e.to_string())?;
            worst = worst.max(eq.tv_distance);
            check(eq.tv_distance < 1e-9, || {
                format!("circuit {i}: TV {}", eq.tv_distance)
            })?;
        }
    }
    Ok(format!("100 circuits × 2 mappers, worst TV {worst:.1e}"))
}

fn token_swapping() -> Outcome {
    let mut instances = 0usize;
    for n in 1..=5 {
        let perms = permutations(n);
        for t in connected_graphs(n) {
            let opt = optimal_swaps(&t);
            let from: Placement = (0..n).map(|l| (l, l)).collect();
            for perm in &perms {
                let to: Placement = (0..n).map(|l| (l, perm[l])).collect();
                let route = token_swap_route(&from, &to, &t).map_err(|e| e.to_string())?;
                check(route.swaps.iter().all(|&(a, b)| t.has_edge(a, b)), || {
                    format!("non-edge swap on {:?}", t.edges())
                })?;
                check(route.apply(&from) == to, || {
                    format!("wrong arrangement for {perm:?} on {:?}", t.edges())
                })?;
                let mut arrangement = vec![0; n];
                for l in 0..n {
                    arrangement[perm[l]] = l;
                }
                let best = opt[&arrangement];
                check(route.len() <= 4 * best, || {
                    format!(
                        "{} swaps vs optimum {best} for {perm:?} on {:?}",
                        route.len(),
                        t.edges()
                    )
                })?;
                check(best > 0 || route.is_empty(), || {
                    format!("identity needs 0 swaps, got {}", route.len())
                })?;
                instances += 1;
            }
        }
    }
    Ok(format!(
        "{instances} graph/permutation pairs within 4× optimum"
    ))
}

fn simulator_oracle() -> Outcome {
    let mut r = rng(SEED);
    let mut worst: f64 = 0.0;
    let mut prefixes = 0;
    for n in 2..=3 {
        for (name, c) in benchmark_circuits(n) {
            let native = decompose_to_native(&c).map_err(|e| e.to_string())?;
            let noise = random_noise(&mut r, n);
            for k in 1..=native.gates.len() {
                let p = prefix(&native, k);
                let oracle = kraus_oracle(&p, &noise);
                let got = simulate_noisy(&p, &noise).map_err(|e| e.to_string())?;
                check(got.max_trace_error < 1e-9, || {
                    format!("{name} prefix {k}: trace {}", got.max_trace_error)
                })?;
                if let Some(want) = oracle.states.last() {
                    for (i, row) in want.iter().enumerate() {
                        for (j, w) in row.iter().enumerate() {
                            worst = worst.max((got.state.get(i, j) - w).norm());
                        }
                    }
                }
                for (a, b) in got.distribution.probs.iter().zip(&oracle.distribution) {
                    worst = worst.max((a - b).abs());
                }
                prefixes += 1;
            }
        }
    }
    check(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    // Trace along a full scenario that simulates every completed task.
    let mut s = runtime_scenario(1, 2, SEED);
    s.policy.simulate_results = true;
    let report = run_scenario(&s).map_err(|e| e.to_string())?;
    check(report.max_trace_error < 1e-9, || {
        format!("scenario trace error {}", report.max_trace_error)
    })?;
    Ok(format!(
        "{prefixes} prefixes, max deviation {worst:.1e}; scenario trace error {:.1e}",
        report.max_trace_error
    ))
}

fn determinism() -> Outcome {
    for name in EXPERIMENTS {
        for format in [Format::Csv, Format::Jsonl] {
            let files = || {
                run_experiment(name, SEED, format)
                    .and_then(|b| b.files(format))
                    .map_err(|e| e.to_string())
            };
            let (a, b) = (files()?, files()?);
            check(a == b, || {
                format!("{name} ({format:?}) differs between reruns")
            })?;
        }
    }
    Ok("runtime, calibration and mapping bundles identical in csv and jsonl".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("AC1", "HRRN oracle equivalence", 5, hrrn_equivalence),
        ("AC2", "parallel co-execution", 10, parallel_co_execution),
        (
            "AC3",
            "calibration closed loop",
            30,
            calibration_closed_loop,
        ),
        (
            "AC4",
            "mapping fidelity-awareness",
            60,
            mapping_fidelity_awareness,
        ),
        ("AC5", "mapped-circuit semantics", 60, mapped_semantics),
        ("AC6", "token swapping", 120, token_swapping),
        ("AC7", "simulator oracle", 60, simulator_oracle),
        ("AC8", "determinism", 60, determinism),
    ];
    let mut failed = 0;
    for (id, title, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(budget) => {
                Err(format!("{detail}; took {elapsed:.2?}, budget {budget} s"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("{id} PASS {title} [{elapsed:.2?} < {budget} s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {title} [{elapsed:.2?}, budget {budget} s] {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
