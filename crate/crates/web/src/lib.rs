//! Browser bindings: map a benchmark onto the split-fidelity processor,
//! trace drift with and without calibration, and simulate circuit text.
//! Every export returns a JSON string for the page to render.

use std::collections::BTreeSet;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qkernel::circuit::{decompose_to_native, generate_benchmark, parse_circuit, Benchmark};
use qkernel::harness::{
    calibration_scenario, mapped_state_fidelity, run_scenario, simulate_mapped, split_qpu,
};
use qkernel::mapper::{map_circuit, map_naive, DEFAULT_BEAM};
use qkernel::noisy_sim::{simulate_ideal, Distribution};
use qkernel::qpu::{build_qpu, QpuId, QpuModel};

#[derive(Serialize)]
pub struct QubitView {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub single: f64,
    /// Logical qubit held here at the end, if any.
    pub logical: Option<usize>,
    pub used: bool,
}

#[derive(Serialize)]
pub struct MappingView {
    pub benchmark: String,
    pub arm: String,
    pub fidelity_score: f64,
    pub state_fidelity: f64,
    pub swaps: usize,
    pub gates: usize,
    pub qubits: Vec<QubitView>,
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Serialize)]
pub struct TracePoint {
    pub t: u64,
    pub min_single: f64,
    pub min_two: f64,
    pub score: Option<f64>,
}

#[derive(Serialize)]
pub struct TraceView {
    pub calibrated: Vec<TracePoint>,
    pub uncalibrated: Vec<TracePoint>,
    pub calibrations: Vec<u64>,
    pub completed: (usize, usize),
    pub single_threshold: f64,
    pub double_threshold: f64,
}

#[derive(Serialize)]
pub struct DistributionView {
    pub qubits: Vec<usize>,
    pub outcomes: Vec<(String, f64)>,
}

fn grid_position(q: usize) -> (usize, usize) {
    (q / 4, q % 4)
}

fn demo_qpu() -> Result<QpuModel, String> {
    build_qpu(QpuId(0), &split_qpu()).map_err(|e| e.to_string())
}

/// Maps `benchmark` (`qft`, `ghz`, `dj`, `bv`) at `n` qubits onto the split
/// 2×4 processor, fidelity-aware or naive.
pub fn mapping_view(benchmark: &str, n: usize, naive: bool) -> Result<MappingView, String> {
    let kind: Benchmark = match benchmark {
        "bv" => Benchmark::bv_all_ones(n),
        other => other
            .parse()
            .map_err(|e: qkernel::circuit::CircuitError| e.to_string())?,
    };
    let c = generate_benchmark(&kind, n).map_err(|e| e.to_string())?;
    let qpu = demo_qpu()?;
    let m = if naive {
        let all: BTreeSet<usize> = (0..qpu.n_qubits()).collect();
        map_naive(&c, &qpu, &all)
    } else {
        map_circuit(&c, &qpu, DEFAULT_BEAM)
    }
    .map_err(|e| e.to_string())?;
    let (state_fidelity, _) = mapped_state_fidelity(&m, &qpu).map_err(|e| e.to_string())?;
    let used = m.footprint();
    let qubits = (0..qpu.n_qubits())
        .map(|q| {
            let (row, col) = grid_position(q);
            QubitView {
                index: q,
                row,
                col,
                single: qpu.single_fidelity(q),
                logical: m.final_layout.iter().position(|&p| p == q),
                used: used.contains(&q),
            }
        })
        .collect();
    let edges = qpu
        .topology
        .edges()
        .iter()
        .map(|&(a, b)| (a, b, qpu.two_fidelity(a, b).unwrap_or(0.0)))
        .collect();
    Ok(MappingView {
        benchmark: benchmark.to_string(),
        arm: if naive { "naive" } else { "aware" }.into(),
        fidelity_score: m.fidelity_score,
        state_fidelity,
        swaps: m.swap_count,
        gates: m.circuit.len(),
        qubits,
        edges,
    })
}

/// Paired drifting runs over `hours` simulated hours.
pub fn trace_view(hours: u32, seed: u64) -> Result<TraceView, String> {
    let run = |calibrate: bool| {
        let mut s = calibration_scenario(calibrate, seed);
        s.duration = i64::from(hours.clamp(1, 24)) * 3600;
        run_scenario(&s).map_err(|e| e.to_string())
    };
    let (cal, uncal) = (run(true)?, run(false)?);
    let points = |r: &qkernel::harness::Report| {
        r.quality
            .iter()
            .map(|q| TracePoint {
                t: q.timestamp,
                min_single: q.min_single,
                min_two: q.min_two,
                score: q.reference_score,
            })
            .collect()
    };
    let policy = calibration_scenario(true, seed).calibration;
    Ok(TraceView {
        calibrated: points(&cal),
        uncalibrated: points(&uncal),
        calibrations: cal.calibrations.iter().map(|c| c.time).collect(),
        completed: (cal.completed_general(), uncal.completed_general()),
        single_threshold: policy.single_threshold,
        double_threshold: policy.double_threshold,
    })
}

/// Simulates circuit text, ideally or mapped onto the split processor with noise.
pub fn distribution_view(circuit: &str, noisy: bool) -> Result<DistributionView, String> {
    let c = decompose_to_native(&parse_circuit(circuit).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if c.n_qubits > 6 {
        return Err(format!(
            "the demo simulates at most 6 qubits, got {}",
            c.n_qubits
        ));
    }
    let d: Distribution = if noisy {
        let qpu = demo_qpu()?;
        let m = map_circuit(&c, &qpu, DEFAULT_BEAM).map_err(|e| e.to_string())?;
        let (physical, _) = simulate_mapped(&m, &qpu).map_err(|e| e.to_string())?;
        // Report the outcome on the logical readout qubits.
        let wanted: Vec<usize> = c
            .readout_qubits()
            .iter()
            .map(|&l| m.final_layout[l])
            .collect();
        let k = physical.qubits.len();
        let pos: Vec<usize> = wanted
            .iter()
            .map(|w| {
                physical
                    .qubits
                    .iter()
                    .position(|q| q == w)
                    .expect("readout qubit")
            })
            .collect();
        let mut probs = vec![0.0; 1 << wanted.len()];
        for (i, p) in physical.probs.iter().enumerate() {
            let key = pos.iter().enumerate().fold(0, |acc, (j, &b)| {
                acc | (((i >> (k - 1 - b)) & 1) << (wanted.len() - 1 - j))
            });
            probs[key] += p;
        }
        Distribution {
            qubits: c.readout_qubits(),
            probs,
        }
    } else {
        simulate_ideal(&c).map_err(|e| e.to_string())?.distribution
    };
    Ok(DistributionView {
        qubits: d.qubits.clone(),
        outcomes: (0..d.probs.len())
            .map(|i| (d.bitstring(i), d.probs[i]))
            .collect(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = mapBenchmark)]
pub fn map_benchmark(benchmark: &str, n: usize, naive: bool) -> Result<String, JsError> {
    to_js(mapping_view(benchmark, n, naive))
}

#[wasm_bindgen(js_name = driftTrace)]
pub fn drift_trace(hours: u32, seed: u32) -> Result<String, JsError> {
    to_js(trace_view(hours, u64::from(seed)))
}

#[wasm_bindgen(js_name = simulateCircuit)]
pub fn simulate_circuit(circuit: &str, noisy: bool) -> Result<String, JsError> {
    to_js(distribution_view(circuit, noisy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aware_mapping_beats_naive_on_ghz() {
        let aware = mapping_view("ghz", 3, false).unwrap();
        let naive = mapping_view("ghz", 3, true).unwrap();
        assert!(aware.state_fidelity > naive.state_fidelity);
        assert_eq!(aware.qubits.len(), 8);
        assert_eq!(
            aware.qubits.iter().filter(|q| q.logical.is_some()).count(),
            3
        );
    }

    #[test]
    fn trace_covers_both_arms() {
        let t = trace_view(2, 1).unwrap();
        assert_eq!(t.calibrated.len(), t.uncalibrated.len());
        assert!(!t.calibrated.is_empty());
    }

    #[test]
    fn noisy_ghz_keeps_most_weight_on_the_ideal_outcomes() {
        let d = distribution_view("H 0\nCNOT 0,1\nMEASURE 0\nMEASURE 1\n", true).unwrap();
        let weight: f64 = d
            .outcomes
            .iter()
            .filter(|(b, _)| b == "00" || b == "11")
            .map(|(_, p)| p)
            .sum();
        assert!(weight > 0.8 && weight < 1.0, "{weight}");
        assert!(distribution_view("H 9", false).is_err());
    }
}
