//! Line-oriented circuit text format.
//!
//! ```text
//! # comment
//! QUBITS 3          (optional; defaults to max operand + 1)
//! H 0
//! CNOT 0,1
//! U3 2 1.5707963267948966,0,3.141592653589793
//! MEASURE 0
//! ```
//!
//! Each gate line is `KIND q0[,q1[,q2]] [param,...]`. Everything after `#` is ignored.

use std::fmt::Write as _;

use super::{Circuit, CircuitError, Gate, GateKind};

pub fn parse_circuit(src: &str) -> Result<Circuit, CircuitError> {
    let mut declared = None;
    let mut gates = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CircuitError::Parse {
            line: line_no,
            message,
        };
        let mut fields = line.split_whitespace();
        let head = fields.next().expect("non-empty line");
        if head.eq_ignore_ascii_case("QUBITS") {
            let n = fields
                .next()
                .ok_or_else(|| err("QUBITS needs a count".into()))?
                .parse::<usize>()
                .map_err(|e| err(format!("bad qubit count: {e}")))?;
            if declared.is_some() || !gates.is_empty() {
                return Err(err("QUBITS must appear once, before any gate".into()));
            }
            declared = Some(n);
            continue;
        }
        let kind: GateKind = head.parse().map_err(|e: CircuitError| err(e.to_string()))?;
        let qubits = fields
            .next()
            .ok_or_else(|| err(format!("{kind} needs qubit operands")))?
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| err(format!("bad qubit index: {e}")))?;
        let params = match fields.next() {
            Some(p) => p
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(format!("bad parameter: {e}")))?,
            None => Vec::new(),
        };
        if let Some(extra) = fields.next() {
            return Err(err(format!("unexpected trailing field `{extra}`")));
        }
        if qubits.len() != kind.arity() {
            return Err(err(format!(
                "{kind} takes {} qubit(s), got {}",
                kind.arity(),
                qubits.len()
            )));
        }
        if params.len() != kind.param_count() {
            return Err(err(format!(
                "{kind} takes {} parameter(s), got {}",
                kind.param_count(),
                params.len()
            )));
        }
        gates.push(Gate::new(kind, qubits, params));
    }
    let inferred = gates
        .iter()
        .flat_map(|g| g.qubits.iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    let circuit = Circuit {
        n_qubits: declared.unwrap_or(inferred),
        gates,
    };
    circuit.check()?;
    Ok(circuit)
}

/// Serializes a circuit; `parse_circuit(write_circuit(c)) == c`.
pub fn write_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "QUBITS {}", c.n_qubits);
    for g in &c.gates {
        let qubits = g
            .qubits
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = write!(out, "{} {}", g.kind, qubits);
        if !g.params.is_empty() {
            let params = g
                .params
                .iter()
                .map(|p| format!("{p:?}"))
                .collect::<Vec<_>>()
                .join(",");
            let _ = write!(out, " {params}");
        }
        out.push('\n');
    }
    out
}
