//! Fidelity-aware qubit mapping.
//!
//! Phase 1 searches for sequences of embeddings (partial logical→physical
//! maps on which a run of two-qubit gates sits on couplers). Phase 2 routes
//! between consecutive embeddings by token swapping. Phase 3 emits the
//! physical circuit and scores it; the best-scoring path wins.

mod embed;
mod emit;
mod naive;
mod token_swap;

pub use embed::embedding_sequences;
pub use naive::map_naive;
pub use token_swap::{token_swap_route, SwapRoute};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{build_interaction_dag, decompose_to_native, Circuit, CircuitError, GateKind};
use crate::qpu::QpuModel;

pub const DEFAULT_BEAM: usize = 64;

/// Logical qubit → physical qubit.
pub type Placement = BTreeMap<usize, usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(
        "circuit needs {needed} qubits but the largest connected usable region has {available}"
    )]
    TooLarge { needed: usize, available: usize },
    #[error("beam width must be at least 1")]
    ZeroBeam,
    #[error("no embedding found for DAG vertex {0}")]
    NoEmbedding(usize),
    #[error("CZ on ({0},{1}) is not on a coupler")]
    NotAnEdge(usize, usize),
    #[error("{0} is not a native gate")]
    NonNative(GateKind),
    #[error("placement: {0}")]
    Placement(String),
    #[error("token swapping did not converge")]
    RoutingFailed,
}

/// A partial injective placement and the DAG vertices it covers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub placement: Placement,
    pub vertices: Vec<usize>,
}

/// Embeddings interleaved with the routes between them (`routes[k]` leads
/// from embedding `k` to `k + 1`), plus positions of non-interacting qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingPath {
    pub embeddings: Vec<Embedding>,
    pub routes: Vec<SwapRoute>,
    pub idle: Vec<(usize, usize)>,
    pub fidelity_score: f64,
}

impl MappingPath {
    pub fn swap_count(&self) -> usize {
        self.routes.iter().map(SwapRoute::len).sum()
    }

    fn key(&self) -> Vec<Vec<(usize, usize)>> {
        self.embeddings
            .iter()
            .map(|e| e.placement.iter().map(|(&l, &p)| (l, p)).collect())
            .chain(std::iter::once(self.idle.clone()))
            .collect()
    }
}

/// Structured text dump, stable enough for golden files.
impl fmt::Display for MappingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs = |p: &mut dyn Iterator<Item = (usize, usize)>| {
            p.map(|(l, q)| format!("{l}->{q}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(
            f,
            "mapping-path score={:.12} swaps={}",
            self.fidelity_score,
            self.swap_count()
        )?;
        for (k, e) in self.embeddings.iter().enumerate() {
            if k > 0 {
                let r = &self.routes[k - 1];
                let s: Vec<String> = r.swaps.iter().map(|(a, b)| format!("({a},{b})")).collect();
                writeln!(f, "route {k}: [{}]", s.join(" "))?;
            }
            let v: Vec<String> = e.vertices.iter().map(|v| v.to_string()).collect();
            writeln!(
                f,
                "embedding {k}: vertices=[{}] placement={{{}}}",
                v.join(","),
                pairs(&mut e.placement.iter().map(|(&l, &p)| (l, p)))
            )?;
        }
        writeln!(f, "idle: {{{}}}", pairs(&mut self.idle.iter().copied()))
    }
}

/// A circuit rewritten onto physical qubits, in native gates.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedCircuit {
    /// Width equals the processor's qubit count.
    pub circuit: Circuit,
    /// `final_layout[l]` is the physical qubit holding logical `l` at the end.
    pub final_layout: Vec<usize>,
    pub fidelity_score: f64,
    pub swap_count: usize,
    /// Half-open gate ranges of each inserted SWAP.
    pub swap_blocks: Vec<(usize, usize)>,
    /// Absent for the naive baseline.
    pub path: Option<MappingPath>,
}

impl MappedCircuit {
    /// Physical qubits the circuit touches, plus every layout position.
    pub fn footprint(&self) -> BTreeSet<usize> {
        let mut s = self.circuit.active_qubits();
        s.extend(self.final_layout.iter().copied());
        s
    }
}

/// Product of element fidelities over every gate of a native physical circuit.
pub fn circuit_fidelity(c: &Circuit, qpu: &QpuModel) -> Result<f64, MapError> {
    let mut score = 1.0;
    for g in &c.gates {
        score *= match g.kind {
            GateKind::U3 => qpu.single_fidelity(g.qubits[0]),
            GateKind::Measure => qpu.measure_fidelity(g.qubits[0]),
            GateKind::Cz => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                qpu.two_fidelity(a, b).ok_or(MapError::NotAnEdge(a, b))?
            }
            other => return Err(MapError::NonNative(other)),
        };
    }
    Ok(score)
}

/// Re-emits `path` for `circuit` and scores the result gate by gate.
pub fn path_fidelity(
    path: &MappingPath,
    circuit: &Circuit,
    qpu: &QpuModel,
) -> Result<f64, MapError> {
    let native = decompose_to_native(circuit)?;
    let dag = build_interaction_dag(&native)?;
    let out = emit::emit(
        &native,
        &dag,
        &path.embeddings,
        &path.routes,
        &path.idle,
        qpu.n_qubits(),
    )?;
    circuit_fidelity(&out.circuit, qpu)
}

/// Maps onto the processor's executable region.
pub fn map_circuit(c: &Circuit, qpu: &QpuModel, beam: usize) -> Result<MappedCircuit, MapError> {
    map_circuit_on(c, qpu, &qpu.executable_region(), beam)
}

fn better(a: &MappedCircuit, b: &MappedCircuit) -> Ordering {
    let key = |m: &MappedCircuit| m.path.as_ref().map(MappingPath::key);
    b.fidelity_score
        .total_cmp(&a.fidelity_score)
        .then(a.swap_count.cmp(&b.swap_count))
        .then_with(|| key(a).cmp(&key(b)))
        .then_with(|| a.final_layout.cmp(&b.final_layout))
}

/// Maps using only the physical qubits in `allowed`. Every connected part
/// of `allowed` large enough for the circuit is tried.
pub fn map_circuit_on(
    c: &Circuit,
    qpu: &QpuModel,
    allowed: &BTreeSet<usize>,
    beam: usize,
) -> Result<MappedCircuit, MapError> {
    if beam == 0 {
        return Err(MapError::ZeroBeam);
    }
    let native = decompose_to_native(c)?;
    let dag = build_interaction_dag(&native)?;
    let regions: Vec<BTreeSet<usize>> = qpu
        .topology
        .components(allowed)
        .into_iter()
        .filter(|r| r.len() >= c.n_qubits)
        .collect();
    if regions.is_empty() {
        let available = qpu
            .topology
            .components(allowed)
            .iter()
            .map(BTreeSet::len)
            .max()
            .unwrap_or(0);
        return Err(MapError::TooLarge {
            needed: c.n_qubits,
            available,
        });
    }

    let mut best: Option<MappedCircuit> = None;
    for region in &regions {
        let dist = qpu.topology.distance_matrix(region);
        let seqs = embedding_sequences(&dag, &native, qpu, region, beam)?;
        let candidates: Vec<Result<MappedCircuit, MapError>> = seqs
            .into_par_iter()
            .map(|seq| {
                let routes = emit::plan_routes(&seq, qpu, region, &dist)?;
                let live = emit::final_live_layout(&seq, &routes);
                let idle = emit::place_idle(&live, native.n_qubits, qpu, region)?;
                let out = emit::emit(&native, &dag, &seq, &routes, &idle, qpu.n_qubits())?;
                let score = circuit_fidelity(&out.circuit, qpu)?;
                let path = MappingPath {
                    embeddings: seq,
                    routes,
                    idle,
                    fidelity_score: score,
                };
                Ok(MappedCircuit {
                    circuit: out.circuit,
                    final_layout: out.layout,
                    fidelity_score: score,
                    swap_count: path.swap_count(),
                    swap_blocks: out.swap_blocks,
                    path: Some(path),
                })
            })
            .collect();
        for cand in candidates {
            let cand = cand?;
            if best
                .as_ref()
                .is_none_or(|b| better(&cand, b) == Ordering::Less)
            {
                best = Some(cand);
            }
        }
    }
    Ok(best.expect("at least one region and one sequence"))
}
