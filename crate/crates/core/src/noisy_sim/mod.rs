//! Density-matrix simulation of native circuits with depolarizing gate noise
//! and classical readout flips, plus fidelity and equivalence checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{decompose_to_native, gate_matrix, Circuit, CircuitError, GateKind};
use crate::linalg::{C64, ONE, ZERO};
use crate::qpu::QpuModel;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 10;

/// TV-distance bound used by [`assert_equivalent`].
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("gate {index} ({kind}) is not native; decompose to U3/CZ/MEASURE first")]
    NonNative { index: usize, kind: GateKind },
    #[error("{0} qubits exceeds the simulator limit of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no two-qubit noise entry for pair ({0},{1})")]
    MissingEdge(usize, usize),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Error probabilities per element; `two` is keyed by sorted qubit pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub single: Vec<f64>,
    pub two: Vec<((usize, usize), f64)>,
    pub measure: Vec<f64>,
}

impl NoiseSpec {
    pub fn noiseless(n_qubits: usize) -> Self {
        Self::uniform(n_qubits, 0.0, 0.0, 0.0)
    }

    /// Same probabilities everywhere, with a two-qubit entry for every pair.
    pub fn uniform(n_qubits: usize, single: f64, two: f64, measure: f64) -> Self {
        let mut pairs = Vec::new();
        for a in 0..n_qubits {
            for b in a + 1..n_qubits {
                pairs.push(((a, b), two));
            }
        }
        NoiseSpec {
            single: vec![single; n_qubits],
            two: pairs,
            measure: vec![measure; n_qubits],
        }
    }

    pub fn two_qubit(&self, a: usize, b: usize) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        self.two
            .binary_search_by(|(k, _)| k.cmp(&key))
            .ok()
            .map(|i| self.two[i].1)
    }

    fn validate(&self, n_qubits: usize) -> Result<(), SimError> {
        if self.single.len() < n_qubits || self.measure.len() < n_qubits {
            return Err(SimError::DimensionMismatch(format!(
                "noise covers {} qubits, circuit has {n_qubits}",
                self.single.len().min(self.measure.len())
            )));
        }
        let all = self
            .single
            .iter()
            .chain(self.measure.iter())
            .chain(self.two.iter().map(|(_, p)| p));
        for &p in all {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidProbability(p));
            }
        }
        Ok(())
    }
}

/// `p = 1 − fidelity` for every element of the processor.
pub fn noise_from_qpu(qpu: &QpuModel) -> NoiseSpec {
    let f = &qpu.fidelity;
    NoiseSpec {
        single: f.single.iter().map(|x| 1.0 - x).collect(),
        two: qpu
            .topology
            .edges()
            .iter()
            .zip(&f.two)
            .map(|(&e, x)| (e, 1.0 - x))
            .collect(),
        measure: f.measure.iter().map(|x| 1.0 - x).collect(),
    }
}

/// Row-major `2^n × 2^n` density matrix; qubit 0 is the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    n_qubits: usize,
    rho: Vec<C64>,
}

impl DensityState {
    /// `|0…0⟩⟨0…0|`.
    pub fn zero(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut rho = vec![ZERO; dim * dim];
        rho[0] = ONE;
        DensityState { n_qubits, rho }
    }

    pub fn from_pure(psi: &[C64]) -> Result<Self, SimError> {
        let dim = psi.len();
        if !dim.is_power_of_two() || dim == 0 {
            return Err(SimError::DimensionMismatch(format!("state length {dim}")));
        }
        let mut rho = vec![ZERO; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                rho[r * dim + c] = psi[r] * psi[c].conj();
            }
        }
        Ok(DensityState {
            n_qubits: dim.trailing_zeros() as usize,
            rho,
        })
    }

    /// Maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut rho = vec![ZERO; dim * dim];
        for i in 0..dim {
            rho[i * dim + i] = C64::new(1.0 / dim as f64, 0.0);
        }
        DensityState { n_qubits, rho }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.rho[r * self.dim() + c]
    }

    pub fn entries(&self) -> &[C64] {
        &self.rho
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.rho[i * d + i]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.rho[r * d + c] - self.rho[c * d + r].conj()).norm());
            }
        }
        worst
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// `ρ ← U ρ U†` for a 2×2 `u` on qubit `q`.
    fn apply_1q(&mut self, q: usize, u: [[C64; 2]; 2]) {
        let d = self.dim();
        let m = self.mask(q);
        for r0 in (0..d).filter(|r| r & m == 0) {
            let r1 = r0 | m;
            for c in 0..d {
                let a = self.rho[r0 * d + c];
                let b = self.rho[r1 * d + c];
                self.rho[r0 * d + c] = u[0][0] * a + u[0][1] * b;
                self.rho[r1 * d + c] = u[1][0] * a + u[1][1] * b;
            }
        }
        for r in 0..d {
            let row = &mut self.rho[r * d..(r + 1) * d];
            for c0 in (0..d).filter(|c| c & m == 0) {
                let c1 = c0 | m;
                let a = row[c0];
                let b = row[c1];
                row[c0] = a * u[0][0].conj() + b * u[0][1].conj();
                row[c1] = a * u[1][0].conj() + b * u[1][1].conj();
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let d = self.dim();
        let both = self.mask(a) | self.mask(b);
        let sign = |i: usize| if i & both == both { -1.0 } else { 1.0 };
        for r in 0..d {
            for c in 0..d {
                let s = sign(r) * sign(c);
                if s < 0.0 {
                    self.rho[r * d + c] = -self.rho[r * d + c];
                }
            }
        }
    }

    /// `ρ ← (1−p) ρ + p · (I/2^k ⊗ Tr_Q ρ)` over the qubit set `Q` (k = |Q|).
    fn depolarize(&mut self, qubits: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let d = self.dim();
        let qmask = qubits.iter().fold(0, |acc, &q| acc | self.mask(q));
        let k = qubits.len();
        let weight = 1.0 / f64::from(1u32 << k);
        // All sub-masks of qmask: the values the traced qubits can take.
        let subs: Vec<usize> = (0..d).filter(|s| s & !qmask == 0).collect();
        let mut out = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                let mut v = self.rho[r * d + c] * (1.0 - p);
                if r & qmask == c & qmask {
                    let (rr, cr) = (r & !qmask, c & !qmask);
                    let traced: C64 = subs
                        .iter()
                        .map(|&s| self.rho[(rr | s) * d + (cr | s)])
                        .sum();
                    v += traced * (p * weight);
                }
                out[r * d + c] = v;
            }
        }
        self.rho = out;
    }

    /// Born-rule probabilities over `qubits` (first listed is the leftmost bit).
    pub fn probabilities(&self, qubits: &[usize]) -> Vec<f64> {
        let d = self.dim();
        let k = qubits.len();
        let mut probs = vec![0.0; 1 << k];
        for i in 0..d {
            let key = qubits.iter().enumerate().fold(0, |acc, (j, &q)| {
                acc | (usize::from(i & self.mask(q) != 0) << (k - 1 - j))
            });
            probs[key] += self.rho[i * d + i].re;
        }
        probs
    }
}

/// Probabilities over a list of readout qubits; `qubits[0]` is the leftmost bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub qubits: Vec<usize>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn bitstring(&self, index: usize) -> String {
        let k = self.qubits.len();
        (0..k)
            .map(|j| {
                if index >> (k - 1 - j) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    pub fn get(&self, bits: &str) -> f64 {
        usize::from_str_radix(bits, 2)
            .ok()
            .and_then(|i| self.probs.get(i).copied())
            .unwrap_or(0.0)
    }

    /// Outcomes with probability above `1e-15`, keyed by bitstring.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p.abs() > 1e-15)
            .map(|(i, &p)| (self.bitstring(i), p))
            .collect()
    }

    /// Half the L1 distance; lengths must match.
    pub fn tv_distance(&self, other: &Distribution) -> Result<f64, SimError> {
        if self.probs.len() != other.probs.len() {
            return Err(SimError::DimensionMismatch(format!(
                "distributions over {} and {} outcomes",
                self.probs.len(),
                other.probs.len()
            )));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// `bitstring,probability` rows in index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,probability\n");
        for (i, p) in self.probs.iter().enumerate() {
            let _ = writeln!(out, "{},{p}", self.bitstring(i));
        }
        out
    }

    fn apply_readout_flips(&mut self, flips: &[f64]) {
        let k = self.qubits.len();
        for (j, &p) in flips.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let bit = 1 << (k - 1 - j);
            let old = self.probs.clone();
            for (i, v) in self.probs.iter_mut().enumerate() {
                *v = (1.0 - p) * old[i] + p * old[i ^ bit];
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct IdealResult {
    pub psi: Vec<C64>,
    pub distribution: Distribution,
}

#[derive(Clone, Debug)]
pub struct NoisyResult {
    pub state: DensityState,
    pub distribution: Distribution,
    /// Largest `|Tr ρ − 1|` seen after any step.
    pub max_trace_error: f64,
}

fn check_native(c: &Circuit) -> Result<(), SimError> {
    if c.n_qubits > MAX_QUBITS {
        return Err(SimError::TooManyQubits(c.n_qubits));
    }
    c.check()?;
    for (index, g) in c.gates.iter().enumerate() {
        if !matches!(g.kind, GateKind::U3 | GateKind::Cz | GateKind::Measure) {
            return Err(SimError::NonNative {
                index,
                kind: g.kind,
            });
        }
    }
    Ok(())
}

fn u3_entries(params: &[f64]) -> Result<[[C64; 2]; 2], SimError> {
    let m = gate_matrix(GateKind::U3, params)?;
    Ok([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]])
}

/// Pure-state evolution from `|0…0⟩`.
pub fn simulate_ideal(c: &Circuit) -> Result<IdealResult, SimError> {
    check_native(c)?;
    let n = c.n_qubits;
    let dim = 1usize << n;
    let mut psi = vec![ZERO; dim];
    psi[0] = ONE;
    let mask = |q: usize| 1usize << (n - 1 - q);
    for g in &c.gates {
        match g.kind {
            GateKind::U3 => {
                let u = u3_entries(&g.params)?;
                let m = mask(g.qubits[0]);
                for i0 in (0..dim).filter(|i| i & m == 0) {
                    let (a, b) = (psi[i0], psi[i0 | m]);
                    psi[i0] = u[0][0] * a + u[0][1] * b;
                    psi[i0 | m] = u[1][0] * a + u[1][1] * b;
                }
            }
            GateKind::Cz => {
                let both = mask(g.qubits[0]) | mask(g.qubits[1]);
                for (i, amp) in psi.iter_mut().enumerate() {
                    if i & both == both {
                        *amp = -*amp;
                    }
                }
            }
            _ => {}
        }
    }
    let qubits = c.readout_qubits();
    let k = qubits.len();
    let mut probs = vec![0.0; 1 << k];
    for (i, amp) in psi.iter().enumerate() {
        let key = qubits.iter().enumerate().fold(0, |acc, (j, &q)| {
            acc | (usize::from(i & mask(q) != 0) << (k - 1 - j))
        });
        probs[key] += amp.norm_sqr();
    }
    Ok(IdealResult {
        psi,
        distribution: Distribution { qubits, probs },
    })
}

/// Exact noisy evolution: each gate is followed by a depolarizing channel on its
/// operands; readout qubits then suffer independent bit flips.
pub fn simulate_noisy(c: &Circuit, noise: &NoiseSpec) -> Result<NoisyResult, SimError> {
    check_native(c)?;
    noise.validate(c.n_qubits)?;
    let mut state = DensityState::zero(c.n_qubits);
    let mut max_trace_error: f64 = 0.0;
    for g in &c.gates {
        match g.kind {
            GateKind::U3 => {
                let q = g.qubits[0];
                state.apply_1q(q, u3_entries(&g.params)?);
                state.depolarize(&[q], noise.single[q]);
            }
            GateKind::Cz => {
                let (a, b) = (g.qubits[0], g.qubits[1]);
                let p = noise.two_qubit(a, b).ok_or(SimError::MissingEdge(a, b))?;
                state.apply_cz(a, b);
                state.depolarize(&[a, b], p);
            }
            _ => continue,
        }
        max_trace_error = max_trace_error.max((state.trace() - ONE).norm());
    }
    let qubits = c.readout_qubits();
    let flips: Vec<f64> = qubits.iter().map(|&q| noise.measure[q]).collect();
    let mut distribution = Distribution {
        probs: state.probabilities(&qubits),
        qubits,
    };
    distribution.apply_readout_flips(&flips);
    Ok(NoisyResult {
        state,
        distribution,
        max_trace_error,
    })
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn state_fidelity(psi: &[C64], rho: &DensityState) -> Result<f64, SimError> {
    let d = rho.dim();
    if psi.len() != d {
        return Err(SimError::DimensionMismatch(format!(
            "state of length {} vs density matrix of dimension {d}",
            psi.len()
        )));
    }
    let mut acc = ZERO;
    for r in 0..d {
        if psi[r] == ZERO {
            continue;
        }
        let row: C64 = (0..d).map(|c| rho.get(r, c) * psi[c]).sum();
        acc += psi[r].conj() * row;
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equivalence {
    pub pass: bool,
    pub tv_distance: f64,
}

/// Compares noiseless readout distributions. `layout[l]` is the physical qubit
/// holding logical `l` at the end of `mapped`.
pub fn assert_equivalent(
    original: &Circuit,
    mapped: &Circuit,
    layout: &[usize],
) -> Result<Equivalence, SimError> {
    if layout.len() != original.n_qubits {
        return Err(SimError::DimensionMismatch(format!(
            "layout has {} entries for {} logical qubits",
            layout.len(),
            original.n_qubits
        )));
    }
    let mut seen = vec![false; mapped.n_qubits];
    for &p in layout {
        if p >= mapped.n_qubits || std::mem::replace(&mut seen[p], true) {
            return Err(SimError::DimensionMismatch(format!(
                "layout {layout:?} is not injective into {} physical qubits",
                mapped.n_qubits
            )));
        }
    }
    let ideal_original = simulate_ideal(&decompose_to_native(original)?)?;
    let ideal_mapped = simulate_ideal(&decompose_to_native(mapped)?)?;
    let physical: Vec<usize> = ideal_original
        .distribution
        .qubits
        .iter()
        .map(|&l| layout[l])
        .collect();
    let relabeled = Distribution {
        probs: DensityState::from_pure(&ideal_mapped.psi)?.probabilities(&physical),
        qubits: physical,
    };
    let tv = ideal_original.distribution.tv_distance(&relabeled)?;
    Ok(Equivalence {
        pass: tv < EQUIVALENCE_TOLERANCE,
        tv_distance: tv,
    })
}
