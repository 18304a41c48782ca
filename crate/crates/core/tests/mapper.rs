mod common;

use std::collections::BTreeSet;

use common::random_circuit;

use qkernel::circuit::{generate_benchmark, Benchmark, Circuit};
use qkernel::mapper::{map_circuit, map_circuit_on, map_naive, DEFAULT_BEAM};
use qkernel::noisy_sim::assert_equivalent;
use qkernel::qpu::{build_qpu, QpuId, QpuModel, QpuSpec};
use rand::Rng;

const SPLIT: &str = r#"
topology = { kind = "grid", rows = 2, cols = 4 }
[fidelity]
single = 0.90
two = 0.88
measure = 0.97
[[fidelity.region]]
qubits = [2, 3, 6, 7]
single = 0.99
two = 0.97
"#;

fn split_qpu() -> QpuModel {
    build_qpu(QpuId(0), &QpuSpec::from_toml_str(SPLIT).unwrap()).unwrap()
}

#[test]
fn ghz3_lands_in_the_better_half_with_the_optimal_score() {
    let qpu = split_qpu();
    let c = generate_benchmark(&Benchmark::Ghz, 3).unwrap();
    let m = map_circuit(&c, &qpu, DEFAULT_BEAM).unwrap();
    let right: BTreeSet<usize> = [2, 3, 6, 7].into();
    assert!(
        m.final_layout.iter().all(|p| right.contains(p)),
        "{:?}",
        m.final_layout
    );

    // Independent oracle: score every swap-free placement of the chain.
    // Native form: U3 on q0; per CNOT(c,t): U3(t) CZ(c,t) U3(t); three readouts.
    let s = |p: usize| qpu.single_fidelity(p);
    let mut best: f64 = 0.0;
    for p0 in 0..8 {
        for p1 in 0..8 {
            for p2 in 0..8 {
                if p0 == p1 || p1 == p2 || p0 == p2 {
                    continue;
                }
                let (Some(t01), Some(t12)) = (qpu.two_fidelity(p0, p1), qpu.two_fidelity(p1, p2))
                else {
                    continue;
                };
                let score = s(p0)
                    * s(p1).powi(2)
                    * t01
                    * s(p2).powi(2)
                    * t12
                    * qpu.measure_fidelity(p0)
                    * qpu.measure_fidelity(p1)
                    * qpu.measure_fidelity(p2);
                best = best.max(score);
            }
        }
    }
    assert!(
        (m.fidelity_score - best).abs() < 1e-12,
        "{} vs {best}",
        m.fidelity_score
    );
}

#[test]
fn random_circuits_keep_their_semantics() {
    let mut rng = common::rng(11);
    let qpu = build_qpu(QpuId(0), &QpuSpec::uniform_grid(2, 3, 0.99, 0.95, 0.98)).unwrap();
    for _ in 0..40 {
        let n = rng.random_range(3..=5);
        let len = rng.random_range(1..=20);
        let c = random_circuit(&mut rng, n, len);
        let m = map_circuit(&c, &qpu, 16).unwrap();
        let eq = assert_equivalent(&c, &m.circuit, &m.final_layout).unwrap();
        assert!(eq.pass, "tv {} for {:?}", eq.tv_distance, c);
        let naive = map_naive(&c, &qpu, &qpu.executable_region()).unwrap();
        assert!(
            assert_equivalent(&c, &naive.circuit, &naive.final_layout)
                .unwrap()
                .pass
        );
    }
}

#[test]
fn dropping_a_swap_breaks_equivalence() {
    let qpu = build_qpu(QpuId(0), &QpuSpec::uniform_grid(1, 4, 0.99, 0.95, 0.98)).unwrap();
    let mut c = Circuit::new(3);
    c.x(0).cnot(0, 1).cnot(1, 2).cnot(0, 2).measure_all();
    let m = map_circuit(&c, &qpu, DEFAULT_BEAM).unwrap();
    assert!(m.swap_count >= 1);
    assert!(
        assert_equivalent(&c, &m.circuit, &m.final_layout)
            .unwrap()
            .pass
    );
    let (start, end) = m.swap_blocks[0];
    let mut broken = m.circuit.clone();
    broken.gates.drain(start..end);
    assert!(
        !assert_equivalent(&c, &broken, &m.final_layout)
            .unwrap()
            .pass
    );
}

#[test]
fn wider_beam_never_scores_lower() {
    let mut rng = common::rng(5);
    let qpu = split_qpu();
    for _ in 0..10 {
        let c = random_circuit(&mut rng, 5, 12);
        let narrow = map_circuit(&c, &qpu, 1).unwrap();
        let wide = map_circuit(&c, &qpu, 64).unwrap();
        assert!(wide.fidelity_score >= narrow.fidelity_score);
    }
}

#[test]
fn restricted_region_is_respected() {
    let qpu = split_qpu();
    let allowed: BTreeSet<usize> = [0, 1, 4, 5].into();
    let c = generate_benchmark(&Benchmark::Qft, 3).unwrap();
    let m = map_circuit_on(&c, &qpu, &allowed, 8).unwrap();
    assert!(m.circuit.active_qubits().is_subset(&allowed));
    assert!(
        assert_equivalent(&c, &m.circuit, &m.final_layout)
            .unwrap()
            .pass
    );
}

#[test]
fn mapping_is_deterministic() {
    let qpu = split_qpu();
    let c = generate_benchmark(&Benchmark::Qft, 4).unwrap();
    let a = map_circuit(&c, &qpu, DEFAULT_BEAM).unwrap();
    let b = map_circuit(&c, &qpu, DEFAULT_BEAM).unwrap();
    assert_eq!(a, b);
}

#[test]
fn golden_mapping_path_dump() {
    let qpu = build_qpu(QpuId(0), &QpuSpec::uniform_grid(1, 3, 0.99, 0.95, 0.98)).unwrap();
    let mut c = Circuit::new(3);
    c.cz(0, 1).cz(1, 2).cz(0, 2);
    let m = map_circuit(&c, &qpu, DEFAULT_BEAM).unwrap();
    let dump = m.path.unwrap().to_string();
    let golden = include_str!("golden/triangle_on_path.txt");
    assert_eq!(dump, golden, "dump changed:\n{dump}");
}
