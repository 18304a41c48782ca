use std::collections::BTreeSet;

use super::emit::push_swap;
use super::{circuit_fidelity, MapError, MappedCircuit};
use crate::circuit::{decompose_to_native, Circuit, Gate, GateKind};
use crate::qpu::QpuModel;

/// Fidelity-blind baseline: logical `i` starts on the `i`-th smallest allowed
/// physical qubit; before each CZ on distant qubits the first operand walks
/// along a shortest path until the pair is coupled.
pub fn map_naive(
    c: &Circuit,
    qpu: &QpuModel,
    allowed: &BTreeSet<usize>,
) -> Result<MappedCircuit, MapError> {
    let native = decompose_to_native(c)?;
    let slots: Vec<usize> = allowed.iter().copied().collect();
    if slots.len() < c.n_qubits {
        return Err(MapError::TooLarge {
            needed: c.n_qubits,
            available: slots.len(),
        });
    }
    let dist = qpu.topology.distance_matrix(allowed);
    let mut layout: Vec<usize> = slots[..c.n_qubits].to_vec();
    let mut out = Circuit::new(qpu.n_qubits());
    let mut swap_blocks = Vec::new();
    let mut measured = Vec::new();

    for g in &native.gates {
        match g.kind {
            GateKind::Measure => measured.push(g.qubits[0]),
            GateKind::Cz => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                loop {
                    let (pa, pb) = (layout[a], layout[b]);
                    let d = dist[pa][pb];
                    if d == usize::MAX {
                        return Err(MapError::Placement(format!(
                            "physical {pa} and {pb} are not connected inside the region"
                        )));
                    }
                    if d <= 1 {
                        break;
                    }
                    let next = qpu
                        .topology
                        .neighbors(pa)
                        .iter()
                        .copied()
                        .find(|&n| allowed.contains(&n) && dist[n][pb] + 1 == d)
                        .expect("shortest-path neighbour exists");
                    swap_blocks.push(push_swap(&mut out, pa, next));
                    if let Some(other) = layout.iter().position(|&p| p == next) {
                        layout[other] = pa;
                    }
                    layout[a] = next;
                }
                out.push(Gate::new(GateKind::Cz, vec![layout[a], layout[b]], vec![]));
            }
            _ => {
                let phys: Vec<usize> = g.qubits.iter().map(|&q| layout[q]).collect();
                out.push(Gate::new(g.kind, phys, g.params.clone()));
            }
        }
    }
    for l in measured {
        out.measure(layout[l]);
    }
    let fidelity_score = circuit_fidelity(&out, qpu)?;
    Ok(MappedCircuit {
        circuit: out,
        final_layout: layout,
        fidelity_score,
        swap_count: swap_blocks.len(),
        swap_blocks,
        path: None,
    })
}
