use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::QpuError;

/// Undirected coupling graph over physical qubits `0..n_qubits`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = QpuError;
    fn try_from(raw: RawTopology) -> Result<Self, QpuError> {
        Topology::new(raw.n_qubits, raw.edges)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology {
            n_qubits: t.n_qubits,
            edges: t.edges,
        }
    }
}

impl Topology {
    /// Validates and normalizes an edge list: every edge stored as `(lo, hi)`,
    /// sorted. The graph must be connected with at least two qubits.
    pub fn new(n_qubits: usize, edges: Vec<(usize, usize)>) -> Result<Self, QpuError> {
        if n_qubits < 2 {
            return Err(QpuError::Topology(format!(
                "a processor needs at least 2 qubits, got {n_qubits}"
            )));
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= n_qubits || b >= n_qubits {
                return Err(QpuError::Topology(format!(
                    "edge ({a},{b}) out of range for {n_qubits} qubits"
                )));
            }
            if a == b {
                return Err(QpuError::Topology(format!("self-loop on qubit {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(QpuError::Topology(format!("duplicate edge ({a},{b})")));
            }
        }
        let edges: Vec<_> = seen.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n_qubits];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let topo = Topology {
            n_qubits,
            edges,
            adjacency,
        };
        let all: BTreeSet<usize> = (0..n_qubits).collect();
        if topo.components(&all).len() != 1 {
            return Err(QpuError::Topology("coupling graph is disconnected".into()));
        }
        Ok(topo)
    }

    /// `rows × cols` grid, qubits numbered row-major, nearest neighbours coupled.
    pub fn grid(rows: usize, cols: usize) -> Result<Self, QpuError> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let q = r * cols + c;
                if c + 1 < cols {
                    edges.push((q, q + 1));
                }
                if r + 1 < rows {
                    edges.push((q, q + cols));
                }
            }
        }
        Topology::new(rows * cols, edges)
    }

    pub fn line(n: usize) -> Result<Self, QpuError> {
        Topology::new(n, (1..n).map(|q| (q - 1, q)).collect())
    }

    pub fn ring(n: usize) -> Result<Self, QpuError> {
        let mut edges: Vec<_> = (1..n).map(|q| (q - 1, q)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Topology::new(n, edges)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_index(a, b).is_some()
    }

    /// BFS hop distances from `src` using only vertices in `allowed`.
    /// Unreachable vertices get `usize::MAX`.
    pub fn distances_within(&self, src: usize, allowed: &BTreeSet<usize>) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_qubits];
        if !allowed.contains(&src) {
            return dist;
        }
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if allowed.contains(&v) && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// All-pairs hop distances inside `allowed`.
    pub fn distance_matrix(&self, allowed: &BTreeSet<usize>) -> Vec<Vec<usize>> {
        (0..self.n_qubits)
            .map(|s| self.distances_within(s, allowed))
            .collect()
    }

    /// Connected components of the subgraph induced by `allowed`, each sorted,
    /// ordered by their smallest vertex.
    pub fn components(&self, allowed: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
        let mut left = allowed.clone();
        let mut out = Vec::new();
        while let Some(start) = left.pop_first() {
            let dist = self.distances_within(start, allowed);
            let comp: BTreeSet<usize> = allowed
                .iter()
                .copied()
                .filter(|&v| dist[v] != usize::MAX)
                .collect();
            for v in &comp {
                left.remove(v);
            }
            out.push(comp);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_2x4_has_ten_edges() {
        let t = Topology::grid(2, 4).unwrap();
        assert_eq!(t.n_qubits(), 8);
        // Independent count: rows*(cols-1) + cols*(rows-1).
        assert_eq!(t.edges().len(), 2 * 3 + 4);
        assert!(t.has_edge(1, 5));
        assert!(!t.has_edge(3, 4));
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Topology::new(1, vec![]).is_err());
        assert!(Topology::new(3, vec![(0, 1)]).is_err());
        assert!(Topology::new(2, vec![(0, 0)]).is_err());
        assert!(Topology::new(2, vec![(0, 1), (1, 0)]).is_err());
        assert!(Topology::new(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn restricted_distances_and_components() {
        let t = Topology::grid(2, 4).unwrap();
        let allowed: BTreeSet<usize> = [0, 1, 3, 4, 7].into();
        let d = t.distances_within(0, &allowed);
        assert_eq!(d[4], 1);
        assert_eq!(d[3], usize::MAX);
        let comps = t.components(&allowed);
        assert_eq!(comps, vec![[0, 1, 4].into(), [3, 7].into()]);
    }
}
