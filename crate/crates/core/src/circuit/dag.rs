use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Circuit, CircuitError};

/// A two-qubit gate in the interaction DAG.
///
/// Single-qubit gates travel with the vertex: `before` holds the gates that
/// precede it on its operands (since the previous vertex on that qubit), and
/// `after` holds trailing gates on qubits for which this is the last vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DagVertex {
    pub gate: usize,
    pub qubits: (usize, usize),
    pub before: Vec<usize>,
    pub after: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDag {
    pub n_qubits: usize,
    /// Vertices in program order.
    pub vertices: Vec<DagVertex>,
    /// Dependency edges `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Single-qubit gates on qubits that never take part in a two-qubit gate.
    pub loose: Vec<usize>,
}

impl GateDag {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn successors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == v).map(|e| e.1)
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for &(_, v) in &self.edges {
            deg[v] += 1;
        }
        deg
    }

    /// Kahn's algorithm, always taking the smallest ready vertex.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut deg = self.in_degrees();
        let mut ready: BTreeSet<usize> = (0..deg.len()).filter(|&v| deg[v] == 0).collect();
        let mut order = Vec::with_capacity(deg.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for s in self.successors(v) {
                deg[s] -= 1;
                if deg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        order
    }

    /// Logical qubits touched by at least one vertex.
    pub fn interacting_qubits(&self) -> BTreeSet<usize> {
        self.vertices
            .iter()
            .flat_map(|v| [v.qubits.0, v.qubits.1])
            .collect()
    }

    /// Re-emits the circuit following `order`, with annotations restored around
    /// each vertex and loose gates appended.
    pub fn expand(&self, source: &Circuit, order: &[usize]) -> Circuit {
        let mut out = Circuit::new(source.n_qubits);
        for &v in order {
            let vert = &self.vertices[v];
            for &g in &vert.before {
                out.push(source.gates[g].clone());
            }
            out.push(source.gates[vert.gate].clone());
            for &g in &vert.after {
                out.push(source.gates[g].clone());
            }
        }
        for &g in &self.loose {
            out.push(source.gates[g].clone());
        }
        out
    }
}

/// Builds the two-qubit dependency DAG of a valid circuit.
///
/// Gates acting on three qubits must be decomposed first.
pub fn build_interaction_dag(c: &Circuit) -> Result<GateDag, CircuitError> {
    c.check()?;
    let mut vertices: Vec<DagVertex> = Vec::new();
    let mut edges = BTreeSet::new();
    let mut last: Vec<Option<usize>> = vec![None; c.n_qubits];
    let mut pending: Vec<Vec<usize>> = vec![Vec::new(); c.n_qubits];

    for (i, g) in c.gates.iter().enumerate() {
        match g.qubits.len() {
            1 => pending[g.qubits[0]].push(i),
            2 => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                let id = vertices.len();
                let mut before = std::mem::take(&mut pending[a]);
                before.append(&mut pending[b]);
                for q in [a, b] {
                    if let Some(u) = last[q] {
                        edges.insert((u, id));
                    }
                    last[q] = Some(id);
                }
                vertices.push(DagVertex {
                    gate: i,
                    qubits: (a, b),
                    before,
                    after: Vec::new(),
                });
            }
            _ => {
                return Err(CircuitError::WideGate {
                    index: i,
                    kind: g.kind,
                })
            }
        }
    }

    let mut loose = Vec::new();
    for q in 0..c.n_qubits {
        match last[q] {
            Some(v) => vertices[v].after.append(&mut pending[q]),
            None => loose.append(&mut pending[q]),
        }
    }
    // Trailing gates are appended qubit by qubit; restore program order.
    for v in &mut vertices {
        v.after.sort_unstable();
    }
    loose.sort_unstable();

    Ok(GateDag {
        n_qubits: c.n_qubits,
        vertices,
        edges: edges.into_iter().collect(),
        loose,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_benchmark, Benchmark};

    #[test]
    fn chain_has_one_edge() {
        let mut c = Circuit::new(3);
        c.cz(0, 1).cz(1, 2);
        let d = build_interaction_dag(&c).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.edges, vec![(0, 1)]);
    }

    #[test]
    fn disjoint_pairs_have_no_edges() {
        let mut c = Circuit::new(4);
        c.cz(0, 1).cz(2, 3);
        let d = build_interaction_dag(&c).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.edges.is_empty());
    }

    #[test]
    fn repeated_pair_then_neighbor_forms_chain() {
        let mut c = Circuit::new(3);
        c.cz(0, 1).cz(0, 1).cz(1, 2);
        let d = build_interaction_dag(&c).unwrap();
        assert_eq!(d.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn annotations_attach_to_neighbors() {
        let mut c = Circuit::new(4);
        c.h(0).cz(0, 1).h(1).h(3).cz(1, 2).measure(0);
        let d = build_interaction_dag(&c).unwrap();
        assert_eq!(d.vertices[0].before, vec![0]);
        assert_eq!(d.vertices[1].before, vec![2]);
        assert_eq!(d.vertices[0].after, vec![5]);
        assert_eq!(d.loose, vec![3]);
    }

    #[test]
    fn wide_gates_are_rejected() {
        let mut c = Circuit::new(3);
        c.push(crate::circuit::Gate::new(
            crate::circuit::GateKind::Toffoli,
            vec![0, 1, 2],
            vec![],
        ));
        assert!(matches!(
            build_interaction_dag(&c),
            Err(CircuitError::WideGate { index: 0, .. })
        ));
    }

    #[test]
    fn topological_expansion_keeps_every_gate() {
        let c = generate_benchmark(&Benchmark::Qft, 4).unwrap();
        let d = build_interaction_dag(&c).unwrap();
        let order = d.topological_order();
        assert_eq!(order.len(), d.len());
        let back = d.expand(&c, &order);
        assert_eq!(back.gates.len(), c.gates.len());
    }
}
