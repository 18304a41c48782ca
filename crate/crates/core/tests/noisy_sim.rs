mod common;

use common::{benchmark_circuits, kraus_oracle, prefix, random_noise, rng};
use qkernel::circuit::decompose_to_native;
use qkernel::noisy_sim::simulate_noisy;

/// Every prefix of every 2–3-qubit benchmark, against explicit Kraus sums.
#[test]
fn benchmark_prefixes_match_the_kraus_oracle() {
    let mut r = rng(17);
    for n in 2..=3 {
        for (name, c) in benchmark_circuits(n) {
            let native = decompose_to_native(&c).unwrap();
            let noise = random_noise(&mut r, n);
            let oracle = kraus_oracle(&native, &noise);
            let unitary_steps = native.gates.iter().filter(|g| g.kind.is_unitary()).count();
            assert_eq!(oracle.states.len(), unitary_steps);
            let mut step = 0;
            for k in 0..=native.gates.len() {
                let p = prefix(&native, k);
                let got = simulate_noisy(&p, &noise).unwrap();
                assert!(
                    got.max_trace_error < 1e-9,
                    "{name}: trace {}",
                    got.max_trace_error
                );
                step += usize::from(k > 0 && native.gates[k - 1].kind.is_unitary());
                if step == 0 {
                    continue;
                }
                let want = &oracle.states[step - 1];
                for (i, row) in want.iter().enumerate() {
                    for (j, w) in row.iter().enumerate() {
                        let diff = (got.state.get(i, j) - w).norm();
                        assert!(
                            diff < 1e-9,
                            "{name} n={n} prefix {k} entry ({i},{j}) off by {diff}"
                        );
                    }
                }
            }
            let full = simulate_noisy(&native, &noise).unwrap();
            for (a, b) in full.distribution.probs.iter().zip(&oracle.distribution) {
                assert!((a - b).abs() < 1e-9, "{name} n={n}: {a} vs {b}");
            }
        }
    }
}
