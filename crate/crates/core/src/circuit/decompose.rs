use std::f64::consts::PI;

use super::{Circuit, CircuitError, Gate, GateKind};

/// True if the circuit only uses `{U3, CZ, Measure}`.
pub fn is_native(c: &Circuit) -> bool {
    c.gates
        .iter()
        .all(|g| matches!(g.kind, GateKind::U3 | GateKind::Cz | GateKind::Measure))
}

/// Rewrites a circuit over `{U3, CZ, Measure}`. Exact up to global phase.
pub fn decompose_to_native(c: &Circuit) -> Result<Circuit, CircuitError> {
    c.check()?;
    let mut out = Circuit::new(c.n_qubits);
    for g in &c.gates {
        lower(g, &mut out.gates)?;
    }
    Ok(out)
}

fn h(q: usize) -> Gate {
    Gate::u3(q, PI / 2.0, 0.0, PI)
}

fn phase(q: usize, lambda: f64) -> Gate {
    Gate::u3(q, 0.0, 0.0, lambda)
}

fn cnot(out: &mut Vec<Gate>, c: usize, t: usize) {
    out.push(h(t));
    out.push(Gate::two(GateKind::Cz, c, t));
    out.push(h(t));
}

/// `exp(-i beta/2 Z⊗Z)` on `(a, b)`.
fn zz_rotation(out: &mut Vec<Gate>, a: usize, b: usize, beta: f64) {
    cnot(out, a, b);
    out.push(phase(b, beta));
    cnot(out, a, b);
}

fn lower(g: &Gate, out: &mut Vec<Gate>) -> Result<(), CircuitError> {
    let q = &g.qubits;
    let p = &g.params;
    match g.kind {
        GateKind::U3 | GateKind::Cz | GateKind::Measure => out.push(g.clone()),
        GateKind::H => out.push(h(q[0])),
        GateKind::X => out.push(Gate::u3(q[0], PI, 0.0, PI)),
        GateKind::Y => out.push(Gate::u3(q[0], PI, PI / 2.0, PI / 2.0)),
        GateKind::Z => out.push(phase(q[0], PI)),
        GateKind::S => out.push(phase(q[0], PI / 2.0)),
        GateKind::T => out.push(phase(q[0], PI / 4.0)),
        GateKind::Cnot => cnot(out, q[0], q[1]),
        GateKind::Swap => {
            cnot(out, q[0], q[1]);
            cnot(out, q[1], q[0]);
            cnot(out, q[0], q[1]);
        }
        GateKind::Cr => {
            let (c, t, theta) = (q[0], q[1], p[0]);
            out.push(phase(c, theta / 2.0));
            cnot(out, c, t);
            out.push(phase(t, -theta / 2.0));
            cnot(out, c, t);
            out.push(phase(t, theta / 2.0));
        }
        GateKind::Cu => {
            let (c, t) = (q[0], q[1]);
            let (theta, phi, lambda, gamma) = (p[0], p[1], p[2], p[3]);
            out.push(phase(c, gamma + (lambda + phi) / 2.0));
            out.push(phase(t, (lambda - phi) / 2.0));
            cnot(out, c, t);
            out.push(Gate::u3(t, -theta / 2.0, 0.0, -(phi + lambda) / 2.0));
            cnot(out, c, t);
            out.push(Gate::u3(t, theta / 2.0, phi, 0.0));
        }
        GateKind::ISwap => {
            // iSWAP(theta) = exp(i theta/4 XX) exp(i theta/4 YY).
            let (a, b, beta) = (q[0], q[1], -p[0] / 2.0);
            out.push(h(a));
            out.push(h(b));
            zz_rotation(out, a, b, beta);
            out.push(h(a));
            out.push(h(b));
            // Basis change Y = (S H) Z (S H)^dagger.
            for &x in &[a, b] {
                out.push(phase(x, -PI / 2.0));
                out.push(h(x));
            }
            zz_rotation(out, a, b, beta);
            for &x in &[a, b] {
                out.push(h(x));
                out.push(phase(x, PI / 2.0));
            }
        }
        GateKind::Toffoli => {
            let (a, b, c) = (q[0], q[1], q[2]);
            let t = |x| phase(x, PI / 4.0);
            let tdg = |x| phase(x, -PI / 4.0);
            out.push(h(c));
            cnot(out, b, c);
            out.push(tdg(c));
            cnot(out, a, c);
            out.push(t(c));
            cnot(out, b, c);
            out.push(tdg(c));
            cnot(out, a, c);
            out.push(t(b));
            out.push(t(c));
            out.push(h(c));
            cnot(out, a, b);
            out.push(t(a));
            out.push(tdg(b));
            cnot(out, a, b);
        }
    }
    Ok(())
}
