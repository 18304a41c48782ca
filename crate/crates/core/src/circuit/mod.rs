//! Circuit IR: gate catalog, validation, interaction DAG, native decomposition,
//! benchmark generators, and the line-oriented text format.

mod bench;
mod dag;
mod decompose;
mod gate;
mod text;

pub use bench::{generate_benchmark, Benchmark, DjOracle};
pub use dag::{build_interaction_dag, DagVertex, GateDag};
pub use decompose::{decompose_to_native, is_native};
pub use gate::{gate_matrix, Gate, GateKind};
pub use text::{parse_circuit, write_circuit};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("unknown gate kind `{0}`")]
    UnknownGate(String),
    #[error("unknown benchmark `{0}` (expected qft, ghz, dj, dj-const0, dj-const1, bv:<bits>)")]
    UnknownBenchmark(String),
    #[error("{kind} takes {expected} parameter(s), got {got}")]
    WrongParamCount {
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    #[error("{0} has no unitary matrix")]
    NotUnitary(GateKind),
    #[error("invalid circuit: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{0} has no decomposition rule here")]
    NoDecomposition(GateKind),
    #[error("gate {index} ({kind}) acts on more than two qubits; decompose first")]
    WideGate { index: usize, kind: GateKind },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported benchmark size: {0}")]
    UnsupportedSize(String),
}

/// One structural problem found by [`validate_circuit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Arity {
        gate: usize,
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    ParamCount {
        gate: usize,
        kind: GateKind,
        expected: usize,
        got: usize,
    },
    OutOfRange {
        gate: usize,
        qubit: usize,
        n_qubits: usize,
    },
    DuplicateOperand {
        gate: usize,
        qubit: usize,
    },
    /// A unitary gate touches a qubit after it was measured.
    MeasureNotTerminal {
        gate: usize,
        qubit: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Arity {
                gate,
                kind,
                expected,
                got,
            } => write!(
                f,
                "gate {gate}: {kind} needs {expected} qubit(s), got {got}"
            ),
            Violation::ParamCount {
                gate,
                kind,
                expected,
                got,
            } => write!(
                f,
                "gate {gate}: {kind} needs {expected} parameter(s), got {got}"
            ),
            Violation::OutOfRange {
                gate,
                qubit,
                n_qubits,
            } => write!(
                f,
                "gate {gate}: qubit {qubit} out of range for {n_qubits} qubits"
            ),
            Violation::DuplicateOperand { gate, qubit } => {
                write!(f, "gate {gate}: qubit {qubit} used twice")
            }
            Violation::MeasureNotTerminal { gate, qubit } => {
                write!(f, "gate {gate}: qubit {qubit} used after measurement")
            }
        }
    }
}

/// An ordered gate list over `n_qubits` logical qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.gates.push(gate);
        self
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.push(Gate::single(GateKind::H, q))
    }

    pub fn x(&mut self, q: usize) -> &mut Self {
        self.push(Gate::single(GateKind::X, q))
    }

    pub fn u3(&mut self, q: usize, theta: f64, phi: f64, lambda: f64) -> &mut Self {
        self.push(Gate::u3(q, theta, phi, lambda))
    }

    pub fn cnot(&mut self, c: usize, t: usize) -> &mut Self {
        self.push(Gate::two(GateKind::Cnot, c, t))
    }

    pub fn cz(&mut self, a: usize, b: usize) -> &mut Self {
        self.push(Gate::two(GateKind::Cz, a, b))
    }

    pub fn swap(&mut self, a: usize, b: usize) -> &mut Self {
        self.push(Gate::two(GateKind::Swap, a, b))
    }

    pub fn cr(&mut self, c: usize, t: usize, theta: f64) -> &mut Self {
        self.push(Gate::new(GateKind::Cr, vec![c, t], vec![theta]))
    }

    pub fn measure(&mut self, q: usize) -> &mut Self {
        self.push(Gate::single(GateKind::Measure, q))
    }

    pub fn measure_all(&mut self) -> &mut Self {
        for q in 0..self.n_qubits {
            self.measure(q);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Qubits with a `Measure` gate, ascending.
    pub fn measured_qubits(&self) -> Vec<usize> {
        self.gates
            .iter()
            .filter(|g| g.kind == GateKind::Measure)
            .flat_map(|g| g.qubits.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Qubits read out at the end: the measured ones, or all qubits if nothing
    /// is measured explicitly.
    pub fn readout_qubits(&self) -> Vec<usize> {
        let measured = self.measured_qubits();
        if measured.is_empty() {
            (0..self.n_qubits).collect()
        } else {
            measured
        }
    }

    /// Qubits touched by any gate, ascending.
    pub fn active_qubits(&self) -> BTreeSet<usize> {
        self.gates
            .iter()
            .flat_map(|g| g.qubits.iter().copied())
            .collect()
    }

    pub fn count_kind(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind.arity() == 2).count()
    }

    /// Errors with every violation if the circuit is not well formed.
    pub fn check(&self) -> Result<(), CircuitError> {
        let v = validate_circuit(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(CircuitError::Invalid(v))
        }
    }
}

/// Collects every structural violation. An empty list means the circuit is valid.
pub fn validate_circuit(c: &Circuit) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut measured = vec![false; c.n_qubits];
    for (i, g) in c.gates.iter().enumerate() {
        let arity = g.kind.arity();
        if g.qubits.len() != arity {
            out.push(Violation::Arity {
                gate: i,
                kind: g.kind,
                expected: arity,
                got: g.qubits.len(),
            });
        }
        if g.params.len() != g.kind.param_count() {
            out.push(Violation::ParamCount {
                gate: i,
                kind: g.kind,
                expected: g.kind.param_count(),
                got: g.params.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for &q in &g.qubits {
            if q >= c.n_qubits {
                out.push(Violation::OutOfRange {
                    gate: i,
                    qubit: q,
                    n_qubits: c.n_qubits,
                });
                continue;
            }
            if !seen.insert(q) {
                out.push(Violation::DuplicateOperand { gate: i, qubit: q });
            }
            if g.kind.is_unitary() && measured[q] {
                out.push(Violation::MeasureNotTerminal { gate: i, qubit: q });
            }
        }
        if g.kind == GateKind::Measure {
            for &q in &g.qubits {
                if q < c.n_qubits {
                    measured[q] = true;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghz2_is_valid() {
        let c = generate_benchmark(&Benchmark::Ghz, 2).unwrap();
        assert!(validate_circuit(&c).is_empty());
    }

    #[test]
    fn duplicate_operand_is_reported() {
        let mut c = Circuit::new(4);
        c.cz(3, 3);
        assert_eq!(
            validate_circuit(&c),
            vec![Violation::DuplicateOperand { gate: 0, qubit: 3 }]
        );
    }

    #[test]
    fn out_of_range_is_reported() {
        let mut c = Circuit::new(4);
        c.h(8);
        assert_eq!(
            validate_circuit(&c),
            vec![Violation::OutOfRange {
                gate: 0,
                qubit: 8,
                n_qubits: 4
            }]
        );
    }

    #[test]
    fn arity_and_measure_order() {
        let mut c = Circuit::new(2);
        c.push(Gate::new(GateKind::Cz, vec![0], vec![]));
        c.measure(1);
        c.h(1);
        let v = validate_circuit(&c);
        assert!(matches!(v[0], Violation::Arity { gate: 0, .. }));
        assert_eq!(v[1], Violation::MeasureNotTerminal { gate: 2, qubit: 1 });
        assert!(c.check().is_err());
    }

    #[test]
    fn readout_defaults_to_all_qubits() {
        let mut c = Circuit::new(3);
        assert_eq!(c.readout_qubits(), vec![0, 1, 2]);
        c.measure(2).measure(0);
        assert_eq!(c.readout_qubits(), vec![0, 2]);
    }
}
