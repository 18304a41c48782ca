use qkernel::calibration::{CalibrationPolicy, CalibrationService, Flag};
use qkernel::qpu::{build_qpu, DecaySpec, DriftSpec, Element, QpuId, QpuModel, QpuSpec};
use qkernel::scheduler::TaskId;

fn drifting() -> QpuModel {
    let mut spec = QpuSpec::uniform_grid(1, 4, 0.995, 0.985, 0.995);
    spec.drift = DriftSpec {
        single: Some(DecaySpec {
            tau: 104_400.0,
            floor: 0.85,
        }),
        two: Some(DecaySpec {
            tau: 82_000.0,
            floor: 0.70,
        }),
        measure: None,
        jitter_sigma: 0.0,
        seed: 0,
    };
    build_qpu(QpuId(0), &spec).unwrap()
}

/// Closed loop without the scheduler: check, calibrate in place, repeat.
#[test]
fn service_keeps_elements_above_threshold_after_first_calibration() {
    let policy = CalibrationPolicy::default();
    let mut qpu = drifting();
    let mut svc = CalibrationService::new(policy.clone(), &[QpuId(0)], 0).unwrap();
    let mut next = 0u64;
    let mut calibrated_once = false;
    let mut t = 0u64;
    while t < 48 * 3600 {
        let check = svc.next_check().unwrap();
        qpu.apply_drift((check - t) as i64).unwrap();
        t = check;
        let out = svc
            .check(&qpu, t, || {
                next += 1;
                TaskId(next)
            })
            .unwrap();
        if calibrated_once {
            assert!(
                out.min_single >= policy.single_threshold,
                "t={t}: {}",
                out.min_single
            );
            assert!(
                out.min_two >= policy.double_threshold,
                "t={t}: {}",
                out.min_two
            );
        }
        let mut task = out.task;
        while let Some(cal) = task {
            let targets = cal.explicit_qubits.clone().unwrap();
            qpu.partition_regions(&targets).unwrap();
            let restored =
                qkernel::calibration::apply_calibration(&mut qpu, &targets, &policy).unwrap();
            qpu.release_qubits(&targets).unwrap();
            calibrated_once = true;
            task = svc.on_calibrated(&qpu, &restored, t, || {
                next += 1;
                TaskId(next)
            });
        }
    }
    assert!(calibrated_once);
}

#[test]
fn flags_name_elements_and_targets_cover_edge_endpoints() {
    assert_eq!(Flag::Qubit(3).to_string(), "q3");
    assert_eq!(Flag::Edge(2, 3).to_string(), "e2-3");
    let targets = qkernel::calibration::calibration_targets(&[Flag::Edge(1, 2), Flag::Qubit(0)]);
    assert_eq!(targets.into_iter().collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn restoration_requires_the_calibration_region() {
    let policy = CalibrationPolicy::default();
    let mut qpu = drifting();
    let targets = [0usize, 1].into_iter().collect();
    assert!(qkernel::calibration::apply_calibration(&mut qpu, &targets, &policy).is_err());
    qpu.apply_drift(10_000).unwrap();
    qpu.partition_regions(&targets).unwrap();
    let restored = qkernel::calibration::apply_calibration(&mut qpu, &targets, &policy).unwrap();
    // Single + readout on both qubits, plus their coupler.
    assert_eq!(restored.len(), 5);
    assert!(restored.iter().any(|(e, _)| *e == Element::Two(0, 1)));
    for (e, v) in restored {
        let base = qpu.element_baseline(e).unwrap();
        assert!(v <= base + 1e-12 && v >= base * policy.restore_floor - 1e-12);
    }
}
