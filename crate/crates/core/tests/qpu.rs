use std::collections::BTreeSet;

use qkernel::qpu::{build_qpu, DecaySpec, DriftSpec, QpuId, QpuModel, QpuSpec, QubitStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid() -> QpuModel {
    build_qpu(QpuId(0), &QpuSpec::uniform_grid(2, 4, 0.99, 0.95, 0.98)).unwrap()
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> BTreeSet<usize> {
    (0..n).filter(|_| rng.random_bool(0.3)).collect()
}

/// Random partition / allocate / release sequences against a plain model of
/// qubit statuses.
#[test]
fn allocation_matches_a_reference_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut q = grid();
        let mut model = [QubitStatus::Free; 8];
        let mut region: BTreeSet<usize> = BTreeSet::new();
        for _ in 0..30 {
            let set = random_subset(&mut rng, 9);
            match rng.random_range(0..3) {
                0 => {
                    let ok = set.iter().all(|&x| x < 8 && model[x] == QubitStatus::Free)
                        && !region.iter().any(|&x| model[x] == QubitStatus::Calibrating);
                    assert_eq!(q.partition_regions(&set).is_ok(), ok, "partition {set:?}");
                    if ok {
                        for &x in &set {
                            model[x] = QubitStatus::Calibrating;
                        }
                        region = set;
                    }
                }
                1 => {
                    let ok = set
                        .iter()
                        .all(|&x| x < 8 && !region.contains(&x) && model[x] == QubitStatus::Free);
                    assert_eq!(q.allocate_qubits(&set).is_ok(), ok, "allocate {set:?}");
                    if ok {
                        for &x in &set {
                            model[x] = QubitStatus::Busy;
                        }
                    }
                }
                _ => {
                    let ok = set.iter().all(|&x| x < 8 && model[x] != QubitStatus::Free);
                    assert_eq!(q.release_qubits(&set).is_ok(), ok, "release {set:?}");
                    if ok {
                        for &x in &set {
                            model[x] = QubitStatus::Free;
                            region.remove(&x);
                        }
                    }
                }
            }
            assert_eq!(q.statuses(), &model[..]);
            assert_eq!(q.calibration_region(), &region);
            // No qubit is both running work and inside the calibration region.
            assert!(region.iter().all(|&x| model[x] != QubitStatus::Busy));
        }
    }
}

#[test]
fn drift_follows_exponential_relaxation() {
    let mut spec = QpuSpec::uniform_grid(1, 3, 0.99, 0.95, 0.98);
    spec.drift = DriftSpec {
        single: Some(DecaySpec {
            tau: 1000.0,
            floor: 0.8,
        }),
        two: Some(DecaySpec {
            tau: 500.0,
            floor: 0.6,
        }),
        measure: None,
        jitter_sigma: 0.0,
        seed: 0,
    };
    let mut q = build_qpu(QpuId(0), &spec).unwrap();
    for _ in 0..10 {
        q.apply_drift(100).unwrap();
    }
    let expect_single = 0.8 + (0.99 - 0.8) * (-1.0f64).exp();
    let expect_two = 0.6 + (0.95 - 0.6) * (-2.0f64).exp();
    assert!((q.single_fidelity(1) - expect_single).abs() < 1e-12);
    assert!((q.two_fidelity(0, 1).unwrap() - expect_two).abs() < 1e-12);
    assert_eq!(q.measure_fidelity(2), 0.98);
}

#[test]
fn jittered_drift_is_reproducible_and_bounded() {
    let mut spec = QpuSpec::uniform_grid(2, 2, 0.99, 0.95, 0.98);
    spec.drift = DriftSpec {
        single: Some(DecaySpec {
            tau: 3600.0,
            floor: 0.9,
        }),
        two: Some(DecaySpec {
            tau: 3600.0,
            floor: 0.7,
        }),
        measure: Some(DecaySpec {
            tau: 3600.0,
            floor: 0.9,
        }),
        jitter_sigma: 0.05,
        seed: 9,
    };
    let run = || {
        let mut q = build_qpu(QpuId(0), &spec).unwrap();
        for _ in 0..200 {
            q.apply_drift(60).unwrap();
        }
        q.fidelity_rows()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.iter().all(|(_, v)| (0.7..=1.0).contains(v)));
}
