use std::collections::BTreeSet;

use super::token_swap::{plan_route, SwapRoute};
use super::{Embedding, MapError, Placement};
use crate::circuit::{decompose_to_native, Circuit, Gate, GateDag, GateKind};
use crate::qpu::QpuModel;

/// Phase 2: routes between consecutive embeddings, tracking the live layout.
pub(crate) fn plan_routes(
    seq: &[Embedding],
    qpu: &QpuModel,
    region: &BTreeSet<usize>,
    dist: &[Vec<usize>],
) -> Result<Vec<SwapRoute>, MapError> {
    let mut routes = Vec::with_capacity(seq.len().saturating_sub(1));
    let mut live = match seq.first() {
        Some(e) => e.placement.clone(),
        None => return Ok(routes),
    };
    for e in &seq[1..] {
        let route = plan_route(&live, &e.placement, &qpu.topology, region, dist)?;
        live = route.apply(&live);
        live.extend(e.placement.iter().map(|(&l, &p)| (l, p)));
        routes.push(route);
    }
    Ok(routes)
}

/// Live layout after the last embedding.
pub(crate) fn final_live_layout(seq: &[Embedding], routes: &[SwapRoute]) -> Placement {
    let mut live = Placement::new();
    for (k, e) in seq.iter().enumerate() {
        if k > 0 {
            live = routes[k - 1].apply(&live);
        }
        live.extend(e.placement.iter().map(|(&l, &p)| (l, p)));
    }
    live
}

/// Positions for logical qubits that never join a two-qubit gate: unused
/// region qubits with the best single × readout fidelity, lowest index on ties.
pub(crate) fn place_idle(
    live: &Placement,
    n_logical: usize,
    qpu: &QpuModel,
    region: &BTreeSet<usize>,
) -> Result<Vec<(usize, usize)>, MapError> {
    let mut used: BTreeSet<usize> = live.values().copied().collect();
    let mut out = Vec::new();
    for l in (0..n_logical).filter(|l| !live.contains_key(l)) {
        let p = region
            .iter()
            .copied()
            .filter(|p| !used.contains(p))
            .max_by(|&x, &y| {
                let fx = qpu.single_fidelity(x) * qpu.measure_fidelity(x);
                let fy = qpu.single_fidelity(y) * qpu.measure_fidelity(y);
                fx.total_cmp(&fy).then(y.cmp(&x))
            })
            .ok_or(MapError::TooLarge {
                needed: n_logical,
                available: region.len(),
            })?;
        used.insert(p);
        out.push((l, p));
    }
    Ok(out)
}

pub(crate) struct Emitted {
    pub circuit: Circuit,
    pub layout: Vec<usize>,
    pub swap_blocks: Vec<(usize, usize)>,
}

/// Appends the native SWAP on `(a, b)`; returns the gate range it occupies.
pub(crate) fn push_swap(out: &mut Circuit, a: usize, b: usize) -> (usize, usize) {
    let mut s = Circuit::new(out.n_qubits);
    s.swap(a, b);
    let start = out.gates.len();
    out.gates
        .extend(decompose_to_native(&s).expect("swap on valid qubits").gates);
    (start, out.gates.len())
}

/// Phase 3: rewrites the native logical circuit onto physical qubits. All
/// measurements are deferred to the end, at the final positions.
pub(crate) fn emit(
    native: &Circuit,
    dag: &GateDag,
    seq: &[Embedding],
    routes: &[SwapRoute],
    idle: &[(usize, usize)],
    n_physical: usize,
) -> Result<Emitted, MapError> {
    if routes.len() + 1 != seq.len().max(1) {
        return Err(MapError::Placement(format!(
            "{} embeddings need {} routes, got {}",
            seq.len(),
            seq.len().saturating_sub(1),
            routes.len()
        )));
    }
    let mut out = Circuit::new(n_physical);
    let mut swap_blocks = Vec::new();
    let mut measured = Vec::new();
    let mut live = Placement::new();

    let put = |out: &mut Circuit, g: &Gate, live: &Placement, measured: &mut Vec<usize>| {
        let phys: Option<Vec<usize>> = g.qubits.iter().map(|q| live.get(q).copied()).collect();
        let phys = phys.ok_or_else(|| {
            MapError::Placement(format!("gate {:?} touches an unplaced logical qubit", g))
        })?;
        if g.kind == GateKind::Measure {
            measured.push(g.qubits[0]);
        } else {
            out.push(Gate::new(g.kind, phys, g.params.clone()));
        }
        Ok::<(), MapError>(())
    };

    for (k, e) in seq.iter().enumerate() {
        if k > 0 {
            for &(a, b) in &routes[k - 1].swaps {
                swap_blocks.push(push_swap(&mut out, a, b));
            }
            live = routes[k - 1].apply(&live);
        }
        for (&l, &p) in &e.placement {
            match live.get(&l) {
                Some(&q) if q != p => {
                    return Err(MapError::Placement(format!(
                        "route left logical {l} on {q}, embedding expects {p}"
                    )))
                }
                Some(_) => {}
                None => {
                    if live.values().any(|&q| q == p) {
                        return Err(MapError::Placement(format!(
                            "physical {p} still occupied when logical {l} arrives"
                        )));
                    }
                    live.insert(l, p);
                }
            }
        }
        for &v in &e.vertices {
            let vert = &dag.vertices[v];
            for &g in &vert.before {
                put(&mut out, &native.gates[g], &live, &mut measured)?;
            }
            put(&mut out, &native.gates[vert.gate], &live, &mut measured)?;
            for &g in &vert.after {
                put(&mut out, &native.gates[g], &live, &mut measured)?;
            }
        }
    }
    for &(l, p) in idle {
        live.insert(l, p);
    }
    for &g in &dag.loose {
        put(&mut out, &native.gates[g], &live, &mut measured)?;
    }
    for &l in &measured {
        out.measure(live[&l]);
    }
    let layout = (0..native.n_qubits)
        .map(|l| {
            live.get(&l)
                .copied()
                .ok_or_else(|| MapError::Placement(format!("logical {l} was never placed")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Emitted {
        circuit: out,
        layout,
        swap_blocks,
    })
}
