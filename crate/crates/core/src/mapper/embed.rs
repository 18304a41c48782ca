use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{Embedding, MapError};
use crate::circuit::{Circuit, GateDag, GateKind};
use crate::qpu::QpuModel;

type Key = Vec<Vec<(usize, usize)>>;

/// A candidate embedding sequence under construction.
#[derive(Clone, Debug)]
struct Lineage {
    sealed: Vec<Embedding>,
    current: Embedding,
    score: f64,
}

impl Lineage {
    fn empty() -> Self {
        Lineage {
            sealed: Vec::new(),
            current: Embedding::default(),
            score: 1.0,
        }
    }

    fn key(&self) -> Key {
        self.sealed
            .iter()
            .chain(std::iter::once(&self.current))
            .map(|e| e.placement.iter().map(|(&l, &p)| (l, p)).collect())
            .collect()
    }

    fn finish(mut self) -> Vec<Embedding> {
        if !self.current.vertices.is_empty() {
            self.sealed.push(self.current);
        }
        self.sealed
    }
}

struct Ctx<'a> {
    dag: &'a GateDag,
    circuit: &'a Circuit,
    qpu: &'a QpuModel,
    allowed: &'a BTreeSet<usize>,
    /// Directed couplers inside the region.
    arcs: Vec<(usize, usize)>,
    /// Expected cost of one routed SWAP, charged when an embedding is sealed.
    seal_penalty: f64,
}

impl Ctx<'_> {
    fn annotation_factor(&self, v: usize, e: &Embedding) -> f64 {
        let vert = &self.dag.vertices[v];
        vert.before
            .iter()
            .chain(&vert.after)
            .map(|&g| {
                let gate = &self.circuit.gates[g];
                let p = e.placement[&gate.qubits[0]];
                match gate.kind {
                    GateKind::Measure => self.qpu.measure_fidelity(p),
                    _ => self.qpu.single_fidelity(p),
                }
            })
            .product()
    }

    fn place(&self, lin: &Lineage, v: usize, new: &[(usize, usize)]) -> Lineage {
        let mut out = lin.clone();
        for &(l, p) in new {
            out.current.placement.insert(l, p);
        }
        out.current.vertices.push(v);
        let (a, b) = self.dag.vertices[v].qubits;
        let (pa, pb) = (out.current.placement[&a], out.current.placement[&b]);
        let two = self.qpu.two_fidelity(pa, pb).expect("placed on a coupler");
        out.score *= two * self.annotation_factor(v, &out.current);
        out
    }

    /// Extensions of the current embedding that cover vertex `v`.
    fn extend(&self, lin: &Lineage, v: usize) -> Vec<Lineage> {
        let (a, b) = self.dag.vertices[v].qubits;
        let pl = &lin.current.placement;
        let used: BTreeSet<usize> = pl.values().copied().collect();
        let free = |p: &usize| self.allowed.contains(p) && !used.contains(p);
        match (pl.get(&a).copied(), pl.get(&b).copied()) {
            (Some(pa), Some(pb)) => {
                if self.qpu.topology.has_edge(pa, pb) {
                    vec![self.place(lin, v, &[])]
                } else {
                    Vec::new()
                }
            }
            (Some(pa), None) => self
                .qpu
                .topology
                .neighbors(pa)
                .iter()
                .filter(|p| free(p))
                .map(|&p| self.place(lin, v, &[(b, p)]))
                .collect(),
            (None, Some(pb)) => self
                .qpu
                .topology
                .neighbors(pb)
                .iter()
                .filter(|p| free(p))
                .map(|&p| self.place(lin, v, &[(a, p)]))
                .collect(),
            (None, None) => self
                .arcs
                .iter()
                .filter(|(x, y)| free(x) && free(y))
                .map(|&(x, y)| self.place(lin, v, &[(a, x), (b, y)]))
                .collect(),
        }
    }

    /// Seals the current embedding and opens a fresh one at vertex `v`.
    fn restart(&self, lin: &Lineage, v: usize) -> Vec<Lineage> {
        let mut base = lin.clone();
        if !base.current.vertices.is_empty() {
            base.sealed.push(std::mem::take(&mut base.current));
            base.score *= self.seal_penalty;
        }
        self.extend(&base, v)
    }
}

fn rank(a: &(Lineage, Key), b: &(Lineage, Key)) -> Ordering {
    b.0.score
        .partial_cmp(&a.0.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(&b.1))
}

fn best(cands: Vec<Lineage>) -> Option<Lineage> {
    cands
        .into_iter()
        .map(|l| {
            let k = l.key();
            (l, k)
        })
        .min_by(rank)
        .map(|(l, _)| l)
}

/// Phase 1: beam search over embedding sequences that together cover every
/// DAG vertex. `circuit` must be the (native) circuit the DAG was built from.
///
/// The first returned sequence is the one a beam of width 1 would produce; it
/// is always kept, so widening the beam never loses that candidate.
pub fn embedding_sequences(
    dag: &GateDag,
    circuit: &Circuit,
    qpu: &QpuModel,
    allowed: &BTreeSet<usize>,
    beam: usize,
) -> Result<Vec<Vec<Embedding>>, MapError> {
    if beam == 0 {
        return Err(MapError::ZeroBeam);
    }
    let topo = &qpu.topology;
    let mut arcs = Vec::new();
    let (mut two_sum, mut two_n) = (0.0, 0usize);
    for &(x, y) in topo.edges() {
        if allowed.contains(&x) && allowed.contains(&y) {
            arcs.push((x, y));
            arcs.push((y, x));
            two_sum += qpu.two_fidelity(x, y).expect("edge");
            two_n += 1;
        }
    }
    if arcs.is_empty() && !dag.is_empty() {
        return Err(MapError::TooLarge {
            needed: 2,
            available: 0,
        });
    }
    let single_mean = if allowed.is_empty() {
        1.0
    } else {
        allowed.iter().map(|&q| qpu.single_fidelity(q)).sum::<f64>() / allowed.len() as f64
    };
    let two_mean = if two_n == 0 {
        1.0
    } else {
        two_sum / two_n as f64
    };
    let ctx = Ctx {
        dag,
        circuit,
        qpu,
        allowed,
        arcs,
        seal_penalty: two_mean.powi(3) * single_mean.powi(6),
    };

    let mut greedy = Lineage::empty();
    let mut beam_set = vec![Lineage::empty()];
    for v in 0..dag.len() {
        let ext = ctx.extend(&greedy, v);
        greedy = if ext.is_empty() {
            best(ctx.restart(&greedy, v))
        } else {
            best(ext)
        }
        .ok_or(MapError::NoEmbedding(v))?;

        let mut next: Vec<Lineage> = beam_set.iter().flat_map(|l| ctx.extend(l, v)).collect();
        if next.is_empty() {
            next = beam_set.iter().flat_map(|l| ctx.restart(l, v)).collect();
        }
        let mut keyed: Vec<(Lineage, Key)> = next
            .into_iter()
            .map(|l| {
                let k = l.key();
                (l, k)
            })
            .collect();
        keyed.sort_by(rank);
        keyed.dedup_by(|a, b| a.1 == b.1);
        keyed.truncate(beam);
        let gk = greedy.key();
        if !keyed.iter().any(|(_, k)| *k == gk) {
            keyed.push((greedy.clone(), gk));
        }
        beam_set = keyed.into_iter().map(|(l, _)| l).collect();
    }

    let gk = greedy.key();
    let mut out = vec![greedy.finish()];
    for l in beam_set {
        if l.key() != gk {
            out.push(l.finish());
        }
    }
    Ok(out)
}
