use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MapError, Placement};
use crate::qpu::Topology;

const TRIALS: u64 = 4;

/// Ordered physical swaps; each pair is a coupler, stored as `(lo, hi)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SwapRoute {
    pub swaps: Vec<(usize, usize)>,
}

impl SwapRoute {
    pub fn len(&self) -> usize {
        self.swaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swaps.is_empty()
    }

    /// Moves the logical qubits of `placement` along the route.
    pub fn apply(&self, placement: &Placement) -> Placement {
        let mut at: BTreeMap<usize, usize> = placement.iter().map(|(&l, &p)| (p, l)).collect();
        for &(a, b) in &self.swaps {
            let la = at.remove(&a);
            let lb = at.remove(&b);
            if let Some(l) = la {
                at.insert(b, l);
            }
            if let Some(l) = lb {
                at.insert(a, l);
            }
        }
        at.into_iter().map(|(p, l)| (l, p)).collect()
    }
}

/// Swaps that carry every logical qubit shared by `from` and `to` to its `to`
/// position and clear the `to` positions of logical qubits absent from `from`.
/// Physical qubits without a required token act as wildcards.
pub fn token_swap_route(
    from: &Placement,
    to: &Placement,
    topo: &Topology,
) -> Result<SwapRoute, MapError> {
    let all: BTreeSet<usize> = (0..topo.n_qubits()).collect();
    let dist = topo.distance_matrix(&all);
    plan_route(from, to, topo, &all, &dist)
}

/// [`token_swap_route`] restricted to the connected vertex set `allowed`,
/// with precomputed hop distances inside it.
pub(crate) fn plan_route(
    from: &Placement,
    to: &Placement,
    topo: &Topology,
    allowed: &BTreeSet<usize>,
    dist: &[Vec<usize>],
) -> Result<SwapRoute, MapError> {
    let n = topo.n_qubits();
    check_placement(from, allowed, "source")?;
    check_placement(to, allowed, "target")?;

    let mut dest: Vec<Option<usize>> = vec![None; n];
    let occupied: BTreeSet<usize> = from.values().copied().collect();
    let mut claimed = BTreeSet::new();
    for (l, &t) in to {
        if let Some(&p) = from.get(l) {
            dest[p] = Some(t);
        }
    }
    // Each target of a newcomer pulls in the nearest unoccupied vertex.
    for (l, &t) in to {
        if from.contains_key(l) {
            continue;
        }
        let v = allowed
            .iter()
            .copied()
            .filter(|v| !occupied.contains(v) && !claimed.contains(v))
            .min_by_key(|&v| (dist[v][t], v))
            .ok_or_else(|| MapError::Placement("no free physical qubit left for routing".into()))?;
        if dist[v][t] == usize::MAX {
            return Err(MapError::Placement(format!(
                "physical qubits {v} and {t} are not connected inside the region"
            )));
        }
        claimed.insert(v);
        dest[v] = Some(t);
    }
    for (v, d) in dest.iter().enumerate() {
        if let Some(d) = *d {
            if dist[v][d] == usize::MAX {
                return Err(MapError::Placement(format!(
                    "physical qubits {v} and {d} are not connected inside the region"
                )));
            }
        }
    }

    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            topo.neighbors(v)
                .iter()
                .copied()
                .filter(|u| allowed.contains(u))
                .collect()
        })
        .collect();
    let cap = 4 * n * n + 16;
    let mut best: Option<Vec<(usize, usize)>> = None;
    for trial in 0..TRIALS {
        let rng = (trial > 0).then(|| ChaCha8Rng::seed_from_u64(trial));
        if let Some(swaps) = run_trial(dest.clone(), &adjacency, dist, rng, cap) {
            if best.as_ref().is_none_or(|b| swaps.len() < b.len()) {
                best = Some(swaps);
            }
        }
    }
    best.map(|swaps| SwapRoute { swaps })
        .ok_or(MapError::RoutingFailed)
}

fn check_placement(p: &Placement, allowed: &BTreeSet<usize>, what: &str) -> Result<(), MapError> {
    let mut seen = BTreeSet::new();
    for (l, &q) in p {
        if !allowed.contains(&q) {
            return Err(MapError::Placement(format!(
                "{what} places logical {l} on physical {q}, outside the usable region"
            )));
        }
        if !seen.insert(q) {
            return Err(MapError::Placement(format!(
                "{what} placement is not injective at physical {q}"
            )));
        }
    }
    Ok(())
}

/// One randomized run of the happy-chain / unhappy-swap heuristic.
/// `dest[v]` is where the token now on `v` must go (`None` = wildcard).
fn run_trial(
    mut dest: Vec<Option<usize>>,
    adjacency: &[Vec<usize>],
    dist: &[Vec<usize>],
    mut rng: Option<ChaCha8Rng>,
    cap: usize,
) -> Option<Vec<(usize, usize)>> {
    let mut swaps = Vec::new();
    loop {
        let todo: Vec<usize> = (0..dest.len())
            .filter(|&v| matches!(dest[v], Some(d) if d != v))
            .collect();
        if todo.is_empty() {
            return Some(swaps);
        }
        if swaps.len() > cap {
            return None;
        }
        let start = match rng.as_mut() {
            Some(r) => todo[r.random_range(0..todo.len())],
            None => todo[0],
        };
        let arcs = |dest: &[Option<usize>], v: usize, rng: &mut Option<ChaCha8Rng>| {
            let mut out: Vec<usize> = match dest[v] {
                Some(d) if d != v => adjacency[v]
                    .iter()
                    .copied()
                    .filter(|&u| dist[u][d] < dist[v][d])
                    .collect(),
                _ => Vec::new(),
            };
            if let Some(r) = rng.as_mut() {
                out.shuffle(r);
            }
            out
        };

        // Depth-first search for a cycle of happy moves reachable from `start`.
        let mut state = vec![0u8; dest.len()]; // 0 new, 1 on stack, 2 done
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(start, arcs(&dest, start, &mut rng))];
        state[start] = 1;
        let mut cycle = None;
        while let Some((v, next)) = stack.last_mut() {
            let v = *v;
            match next.pop() {
                Some(u) if state[u] == 1 => {
                    let pos = stack.iter().position(|(x, _)| *x == u).expect("on stack");
                    cycle = Some(stack[pos..].iter().map(|(x, _)| *x).collect::<Vec<_>>());
                    break;
                }
                Some(u) if state[u] == 0 => {
                    state[u] = 1;
                    let a = arcs(&dest, u, &mut rng);
                    stack.push((u, a));
                }
                Some(_) => {}
                None => {
                    state[v] = 2;
                    stack.pop();
                }
            }
        }

        let chain = match cycle {
            Some(c) => c,
            None => {
                // Follow happy moves to a vertex with no move of its own.
                let mut path = vec![start];
                loop {
                    let v = *path.last().expect("non-empty");
                    match arcs(&dest, v, &mut rng).first() {
                        Some(&u) => path.push(u),
                        None => break,
                    }
                }
                let w = *path.last().expect("non-empty");
                if dest[w].is_some() {
                    // `w` already holds its token: displace it by one step.
                    let v = path[path.len() - 2];
                    vec![v, w]
                } else {
                    path
                }
            }
        };
        for i in (0..chain.len() - 1).rev() {
            let (a, b) = (chain[i], chain[i + 1]);
            dest.swap(a, b);
            swaps.push((a.min(b), a.max(b)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn placement(pairs: &[(usize, usize)]) -> Placement {
        pairs.iter().copied().collect()
    }

    #[test]
    fn identical_placements_need_no_swaps() {
        let t = Topology::line(4).unwrap();
        let p = placement(&[(0, 0), (1, 1), (2, 3)]);
        assert!(token_swap_route(&p, &p, &t).unwrap().is_empty());
    }

    #[test]
    fn transposed_neighbours_take_one_swap() {
        let t = Topology::line(2).unwrap();
        let r = token_swap_route(
            &placement(&[(0, 0), (1, 1)]),
            &placement(&[(0, 1), (1, 0)]),
            &t,
        )
        .unwrap();
        assert_eq!(r.swaps, vec![(0, 1)]);
    }

    #[test]
    fn cyclic_shift_on_a_path_takes_two_swaps() {
        let t = Topology::line(3).unwrap();
        let from = placement(&[(0, 0), (1, 1), (2, 2)]);
        let to = placement(&[(0, 1), (1, 2), (2, 0)]);
        let r = token_swap_route(&from, &to, &t).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.apply(&from), to);
    }

    #[test]
    fn newcomer_target_is_cleared() {
        let t = Topology::line(3).unwrap();
        let from = placement(&[(0, 1)]);
        let to = placement(&[(1, 1)]);
        let r = token_swap_route(&from, &to, &t).unwrap();
        assert_eq!(r.len(), 1);
        assert_ne!(r.apply(&from)[&0], 1);
    }

    #[test]
    fn wildcards_let_tokens_pass() {
        let t = Topology::line(4).unwrap();
        let from = placement(&[(0, 0), (1, 1)]);
        let to = placement(&[(0, 3)]);
        let r = token_swap_route(&from, &to, &t).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.apply(&from)[&0], 3);
    }

    #[test]
    fn rejects_placements_outside_the_graph() {
        let t = Topology::line(3).unwrap();
        assert!(token_swap_route(&placement(&[(0, 5)]), &placement(&[(0, 1)]), &t).is_err());
    }
}
