//! Independent oracles and generators shared by the integration and
//! acceptance tests. Nothing here calls the code under test to compute an
//! expected value.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use qkernel::calibration::CalibrationPolicy;
use qkernel::circuit::{generate_benchmark, Circuit, Gate, GateKind};
use qkernel::noisy_sim::NoiseSpec;
use qkernel::qpu::{build_qpu, QpuId, QpuSpec, Topology};
use qkernel::scheduler::{Event, QuantumTask, Scheduler, SchedulerPolicy, TaskId, Timing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `len` random unitary gates over the whole gate set, then measurements on a
/// random subset of qubits.
pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let kinds: Vec<GateKind> = GateKind::ALL
        .into_iter()
        .filter(|k| k.is_unitary() && k.arity() <= n)
        .collect();
    let mut c = Circuit::new(n);
    for _ in 0..len {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let mut qubits: Vec<usize> = (0..n).collect();
        for i in 0..kind.arity() {
            let j = rng.random_range(i..n);
            qubits.swap(i, j);
        }
        qubits.truncate(kind.arity());
        let params = (0..kind.param_count())
            .map(|_| rng.random_range(-PI..PI))
            .collect::<Vec<_>>();
        c.push(Gate::new(kind, qubits, params));
    }
    for q in 0..n {
        if rng.random_bool(0.7) {
            c.measure(q);
        }
    }
    c
}

// ---------------------------------------------------------------- token swap

/// Every connected labelled graph on `n` vertices.
pub fn connected_graphs(n: usize) -> Vec<Topology> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    (0u32..1 << pairs.len())
        .filter_map(|mask| {
            let edges = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            Topology::new(n, edges).ok()
        })
        .collect()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Breadth-first search over arrangements: the minimum number of edge swaps
/// taking the identity arrangement to every reachable one.
pub fn optimal_swaps(t: &Topology) -> HashMap<Vec<usize>, usize> {
    let start: Vec<usize> = (0..t.n_qubits()).collect();
    let mut seen = HashMap::from([(start.clone(), 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        let d = seen[&state];
        for &(a, b) in t.edges() {
            let mut next = state.clone();
            next.swap(a, b);
            if !seen.contains_key(&next) {
                seen.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    seen
}

// ---------------------------------------------------------------------- HRRN

/// `(submit time, runtime)` per task; the index is the task id.
pub type HrrnCase = Vec<(u64, u64)>;

pub fn random_hrrn_case(rng: &mut ChaCha8Rng) -> HrrnCase {
    let n = rng.random_range(1..=20);
    (0..n)
        .map(|_| (rng.random_range(0..40), rng.random_range(1..=15)))
        .collect()
}

/// Brute force on one processor that runs one task at a time: whenever it is
/// free, recompute `(wait + runtime) / runtime` for everything that has
/// arrived and take the maximum (earlier submission, then lower id, on ties).
pub fn hrrn_oracle(case: &HrrnCase) -> Vec<u64> {
    let mut left: Vec<usize> = (0..case.len()).collect();
    let mut order = Vec::new();
    let mut free_at = 0u64;
    while !left.is_empty() {
        let earliest = left.iter().map(|&i| case[i].0).min().expect("non-empty");
        let now = free_at.max(earliest);
        let ratio = |i: usize| {
            let (submit, e) = case[i];
            ((now - submit) as f64 + e as f64) / e as f64
        };
        let best = left
            .iter()
            .copied()
            .filter(|&i| case[i].0 <= now)
            .max_by(|&a, &b| {
                ratio(a)
                    .partial_cmp(&ratio(b))
                    .expect("finite")
                    .then(case[b].0.cmp(&case[a].0))
                    .then(b.cmp(&a))
            })
            .expect("something has arrived");
        order.push(best as u64);
        free_at = now + case[best].1;
        left.retain(|&i| i != best);
    }
    order
}

/// Drives the real scheduler through the same case and reads the dispatch
/// order off its event log.
pub fn hrrn_dispatch_order(case: &HrrnCase) -> Vec<u64> {
    let mut qpus =
        vec![build_qpu(QpuId(0), &QpuSpec::uniform_grid(2, 4, 0.995, 0.99, 0.995)).unwrap()];
    let policy = SchedulerPolicy {
        max_tasks_per_transaction: 1,
        ..Default::default()
    };
    let mut s = Scheduler::new(policy, &qpus);
    let mut program = Circuit::new(2);
    program.h(0).cnot(0, 1).measure_all();
    let mut arrivals: Vec<(u64, usize)> =
        case.iter().enumerate().map(|(i, &(t, _))| (t, i)).collect();
    arrivals.sort();
    let mut next = 0;
    let cal = CalibrationPolicy::default();
    loop {
        let t = match (
            arrivals.get(next).map(|a| a.0),
            s.next_completion().map(|c| c.0),
        ) {
            (None, None) => break,
            (a, c) => a.into_iter().chain(c).min().unwrap(),
        };
        while let Some((end, txn)) = s.next_completion() {
            if end != t {
                break;
            }
            s.complete_thread(txn, BTreeMap::new(), t, &mut qpus, &cal)
                .unwrap();
        }
        while arrivals.get(next).is_some_and(|a| a.0 == t) {
            let i = arrivals[next].1;
            let mut task =
                QuantumTask::general(TaskId(i as u64), program.clone(), t, &Timing::default())
                    .unwrap();
            task.est_runtime = case[i].1;
            s.submit_task(task).unwrap();
            next += 1;
        }
        s.schedule_tick(&mut qpus, t).unwrap();
    }
    s.events()
        .iter()
        .filter_map(|e| match e {
            Event::Dispatch { tasks, .. } => Some(tasks.iter().map(|t| t.0).collect::<Vec<_>>()),
            _ => None,
        })
        .flatten()
        .collect()
}

// ------------------------------------------------------ Kraus-expansion oracle

type Mat = Vec<Vec<C64>>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn paulis() -> [[[C64; 2]; 2]; 4] {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    [
        [[l, o], [o, l]],
        [[o, l], [l, o]],
        [[o, -i], [i, o]],
        [[l, o], [o, -l]],
    ]
}

/// Full operator from one 2×2 factor per qubit (qubit 0 is the most
/// significant bit).
fn tensor(factors: &[[[C64; 2]; 2]]) -> Mat {
    let n = factors.len();
    let d = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    for (r, row) in m.iter_mut().enumerate() {
        for (col, v) in row.iter_mut().enumerate() {
            let mut x = c(1.0, 0.0);
            for (q, f) in factors.iter().enumerate() {
                let shift = n - 1 - q;
                x *= f[(r >> shift) & 1][(col >> shift) & 1];
            }
            *v = x;
        }
    }
    m
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    let mut out = vec![vec![c(0.0, 0.0); d]; d];
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn dagger(a: &Mat) -> Mat {
    let d = a.len();
    (0..d)
        .map(|i| (0..d).map(|j| a[j][i].conj()).collect())
        .collect()
}

/// `Σ w_k K_k ρ K_k†`.
fn kraus(rho: &Mat, ops: &[(f64, Mat)]) -> Mat {
    let d = rho.len();
    let mut out = vec![vec![c(0.0, 0.0); d]; d];
    for (w, k) in ops {
        let term = matmul(&matmul(k, rho), &dagger(k));
        for i in 0..d {
            for j in 0..d {
                out[i][j] += term[i][j] * *w;
            }
        }
    }
    out
}

fn identity_factors(n: usize) -> Vec<[[C64; 2]; 2]> {
    vec![paulis()[0]; n]
}

/// Density matrix after every step and the final readout distribution, from
/// explicit Kraus sums: each U3 or CZ followed by a Pauli expansion of the
/// depolarizing channel, then independent readout bit flips.
pub struct KrausRun {
    pub states: Vec<Mat>,
    pub distribution: Vec<f64>,
}

pub fn kraus_oracle(circuit: &Circuit, noise: &NoiseSpec) -> KrausRun {
    let n = circuit.n_qubits;
    let d = 1 << n;
    let mut rho = vec![vec![c(0.0, 0.0); d]; d];
    rho[0][0] = c(1.0, 0.0);
    let mut states = Vec::new();
    let p_two = |a: usize, b: usize| {
        let key = (a.min(b), a.max(b));
        noise
            .two
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, p)| *p)
            .expect("pair has noise")
    };
    for g in &circuit.gates {
        match g.kind {
            GateKind::U3 => {
                let q = g.qubits[0];
                let (t, ph, la) = (g.params[0], g.params[1], g.params[2]);
                let (s, co) = ((t / 2.0).sin(), (t / 2.0).cos());
                let u = [
                    [c(co, 0.0), -C64::from_polar(s, la)],
                    [C64::from_polar(s, ph), C64::from_polar(co, ph + la)],
                ];
                let mut f = identity_factors(n);
                f[q] = u;
                rho = kraus(&rho, &[(1.0, tensor(&f))]);
                let p = noise.single[q];
                let ops: Vec<(f64, Mat)> = (0..4)
                    .map(|k| {
                        let mut f = identity_factors(n);
                        f[q] = paulis()[k];
                        let w = if k == 0 { 1.0 - 3.0 * p / 4.0 } else { p / 4.0 };
                        (w, tensor(&f))
                    })
                    .collect();
                rho = kraus(&rho, &ops);
            }
            GateKind::Cz => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                let mut cz = vec![vec![c(0.0, 0.0); d]; d];
                for (i, row) in cz.iter_mut().enumerate() {
                    let both = (i >> (n - 1 - a)) & 1 == 1 && (i >> (n - 1 - b)) & 1 == 1;
                    row[i] = c(if both { -1.0 } else { 1.0 }, 0.0);
                }
                rho = kraus(&rho, &[(1.0, cz)]);
                let p = p_two(a, b);
                let mut ops = Vec::new();
                for ka in 0..4 {
                    for kb in 0..4 {
                        let mut f = identity_factors(n);
                        f[a] = paulis()[ka];
                        f[b] = paulis()[kb];
                        let w = if ka == 0 && kb == 0 {
                            1.0 - 15.0 * p / 16.0
                        } else {
                            p / 16.0
                        };
                        ops.push((w, tensor(&f)));
                    }
                }
                rho = kraus(&rho, &ops);
            }
            GateKind::Measure => continue,
            other => panic!("oracle expects native gates, got {other}"),
        }
        states.push(rho.clone());
    }
    let mut readout: Vec<usize> = circuit
        .gates
        .iter()
        .filter(|g| g.kind == GateKind::Measure)
        .map(|g| g.qubits[0])
        .collect();
    readout.sort();
    readout.dedup();
    if readout.is_empty() {
        readout = (0..n).collect();
    }
    let k = readout.len();
    let mut distribution = vec![0.0; 1 << k];
    for (i, row) in rho.iter().enumerate() {
        let p_true = row[i].re;
        for (out, slot) in distribution.iter_mut().enumerate() {
            let mut w = p_true;
            for (j, &q) in readout.iter().enumerate() {
                let truth = (i >> (n - 1 - q)) & 1;
                let seen = (out >> (k - 1 - j)) & 1;
                let f = noise.measure[q];
                w *= if truth == seen { 1.0 - f } else { f };
            }
            *slot += w;
        }
    }
    KrausRun {
        states,
        distribution,
    }
}

/// Distinct, non-uniform error rates on every element (all pairs coupled).
pub fn random_noise(rng: &mut ChaCha8Rng, n: usize) -> NoiseSpec {
    let mut two = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            two.push(((a, b), rng.random_range(0.0..0.15)));
        }
    }
    NoiseSpec {
        single: (0..n).map(|_| rng.random_range(0.0..0.05)).collect(),
        two,
        measure: (0..n).map(|_| rng.random_range(0.0..0.08)).collect(),
    }
}

/// The benchmark families at `n` qubits.
pub fn benchmark_circuits(n: usize) -> Vec<(String, Circuit)> {
    ["qft", "ghz", "dj", "dj-const1"]
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once(format!("bv:{}", "1".repeat(n - 1))))
        .map(|name| {
            let c = generate_benchmark(&name.parse().unwrap(), n).unwrap();
            (name, c)
        })
        .collect()
}

/// The first `k` gates of `c`.
pub fn prefix(c: &Circuit, k: usize) -> Circuit {
    let mut p = Circuit::new(c.n_qubits);
    for g in &c.gates[..k] {
        p.push(g.clone());
    }
    p
}
