//! Simulated processor model: coupling topology, drifting element fidelities,
//! qubit allocation, and the executable/calibration region split.

mod spec;
mod topology;

pub use spec::{
    DecaySpec, DriftSpec, ElementValues, FidelityOverride, FidelitySpec, QpuSpec, TopologySpec,
};
pub use topology::Topology;

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpuError {
    #[error("config: {0}")]
    Config(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("fidelity: {0}")]
    Fidelity(String),
    #[error("drift: {0}")]
    Drift(String),
    #[error("drift interval must be non-negative, got {0} s")]
    NegativeInterval(i64),
    #[error("qubit {0} does not exist")]
    NoSuchQubit(usize),
    #[error("qubit {qubit} is {status}, expected {expected}")]
    WrongStatus {
        qubit: usize,
        status: QubitStatus,
        expected: &'static str,
    },
    #[error("calibration already in progress on qubits {0:?}")]
    CalibrationInProgress(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QpuId(pub usize);

impl fmt::Display for QpuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "qpu{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitStatus {
    Free,
    Busy,
    Calibrating,
}

impl fmt::Display for QubitStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QubitStatus::Free => "free",
            QubitStatus::Busy => "busy",
            QubitStatus::Calibrating => "calibrating",
        })
    }
}

/// Element classes that carry a fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementClass {
    Single,
    Two,
    Measure,
}

/// A single fidelity-carrying element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    Single(usize),
    Measure(usize),
    Two(usize, usize),
}

impl Element {
    pub fn class(self) -> ElementClass {
        match self {
            Element::Single(_) => ElementClass::Single,
            Element::Measure(_) => ElementClass::Measure,
            Element::Two(..) => ElementClass::Two,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Single(q) => write!(f, "q{q}.single"),
            Element::Measure(q) => write!(f, "q{q}.measure"),
            Element::Two(a, b) => write!(f, "e{a}-{b}.two"),
        }
    }
}

/// Current and baseline fidelities. Edge vectors follow `Topology::edges()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityState {
    pub single: Vec<f64>,
    pub two: Vec<f64>,
    pub measure: Vec<f64>,
    pub baseline_single: Vec<f64>,
    pub baseline_two: Vec<f64>,
    pub baseline_measure: Vec<f64>,
    /// Simulated seconds.
    pub last_update: u64,
}

impl FidelityState {
    pub fn new(single: Vec<f64>, two: Vec<f64>, measure: Vec<f64>) -> Self {
        FidelityState {
            baseline_single: single.clone(),
            baseline_two: two.clone(),
            baseline_measure: measure.clone(),
            single,
            two,
            measure,
            last_update: 0,
        }
    }

    fn class_mut(&mut self, class: ElementClass) -> &mut Vec<f64> {
        match class {
            ElementClass::Single => &mut self.single,
            ElementClass::Two => &mut self.two,
            ElementClass::Measure => &mut self.measure,
        }
    }
}

/// Relaxation toward a floor for one element class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decay {
    pub tau: f64,
    pub floor: f64,
}

impl Decay {
    pub const STATIC: Decay = Decay {
        tau: f64::INFINITY,
        floor: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub single: Decay,
    pub two: Decay,
    pub measure: Decay,
    /// Standard deviation of the log-normal multiplicative jitter per step.
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl DriftParams {
    pub fn none() -> Self {
        DriftParams {
            single: Decay::STATIC,
            two: Decay::STATIC,
            measure: Decay::STATIC,
            jitter_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn decay(&self, class: ElementClass) -> Decay {
        match class {
            ElementClass::Single => self.single,
            ElementClass::Two => self.two,
            ElementClass::Measure => self.measure,
        }
    }

    fn validate(&self) -> Result<(), QpuError> {
        for (name, d) in [
            ("single", self.single),
            ("two", self.two),
            ("measure", self.measure),
        ] {
            // Written negated so NaN is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(d.tau > 0.0) {
                return Err(QpuError::Drift(format!(
                    "{name}.tau must be > 0, got {}",
                    d.tau
                )));
            }
            if !(0.0..1.0).contains(&d.floor) {
                return Err(QpuError::Drift(format!(
                    "{name}.floor must lie in [0, 1), got {}",
                    d.floor
                )));
            }
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(QpuError::Drift(format!(
                "jitter_sigma must be finite and >= 0, got {}",
                self.jitter_sigma
            )));
        }
        Ok(())
    }
}

/// One simulated processor.
#[derive(Clone, Debug)]
pub struct QpuModel {
    pub id: QpuId,
    pub topology: Topology,
    pub fidelity: FidelityState,
    pub drift: DriftParams,
    status: Vec<QubitStatus>,
    calibration_region: BTreeSet<usize>,
    epoch: u64,
    drift_rng: ChaCha8Rng,
    restore_rng: ChaCha8Rng,
}

impl QpuModel {
    /// Builds a processor with every qubit free and executable.
    pub fn new(
        id: QpuId,
        topology: Topology,
        fidelity: FidelityState,
        drift: DriftParams,
    ) -> Result<Self, QpuError> {
        let n = topology.n_qubits();
        let m = topology.edges().len();
        if fidelity.single.len() != n || fidelity.measure.len() != n || fidelity.two.len() != m {
            return Err(QpuError::Fidelity(format!(
                "expected {n} qubit and {m} edge values, got single={} measure={} two={}",
                fidelity.single.len(),
                fidelity.measure.len(),
                fidelity.two.len()
            )));
        }
        drift.validate()?;
        let classes = [
            (
                ElementClass::Single,
                &fidelity.single,
                &fidelity.baseline_single,
            ),
            (ElementClass::Two, &fidelity.two, &fidelity.baseline_two),
            (
                ElementClass::Measure,
                &fidelity.measure,
                &fidelity.baseline_measure,
            ),
        ];
        for (class, current, baseline) in classes {
            let floor = drift.decay(class).floor;
            for (i, (&f, &b)) in current.iter().zip(baseline.iter()).enumerate() {
                if !(0.0..=1.0).contains(&f) || !(0.0..=1.0).contains(&b) {
                    return Err(QpuError::Fidelity(format!(
                        "{class:?} element {i}: fidelity {f} outside [0, 1]"
                    )));
                }
                if f < floor {
                    return Err(QpuError::Fidelity(format!(
                        "{class:?} element {i}: fidelity {f} below drift floor {floor}"
                    )));
                }
            }
        }
        Ok(QpuModel {
            id,
            status: vec![QubitStatus::Free; n],
            calibration_region: BTreeSet::new(),
            epoch: 0,
            drift_rng: ChaCha8Rng::seed_from_u64(drift.seed),
            restore_rng: ChaCha8Rng::seed_from_u64(drift.seed ^ 0x5eed_ca1b_u64),
            topology,
            fidelity,
            drift,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.topology.n_qubits()
    }

    /// Incremented on every fidelity change; lets callers cache fidelity-dependent results.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn status(&self, q: usize) -> QubitStatus {
        self.status[q]
    }

    pub fn statuses(&self) -> &[QubitStatus] {
        &self.status
    }

    pub fn calibration_region(&self) -> &BTreeSet<usize> {
        &self.calibration_region
    }

    pub fn executable_region(&self) -> BTreeSet<usize> {
        (0..self.n_qubits())
            .filter(|q| !self.calibration_region.contains(q))
            .collect()
    }

    /// Free qubits in the executable region.
    pub fn available_qubits(&self) -> BTreeSet<usize> {
        self.executable_region()
            .into_iter()
            .filter(|&q| self.status[q] == QubitStatus::Free)
            .collect()
    }

    pub fn is_idle(&self) -> bool {
        self.status.iter().all(|&s| s == QubitStatus::Free)
    }

    pub fn single_fidelity(&self, q: usize) -> f64 {
        self.fidelity.single[q]
    }

    pub fn measure_fidelity(&self, q: usize) -> f64 {
        self.fidelity.measure[q]
    }

    /// Two-qubit fidelity of the coupler `(a, b)`, if it exists.
    pub fn two_fidelity(&self, a: usize, b: usize) -> Option<f64> {
        self.topology.edge_index(a, b).map(|e| self.fidelity.two[e])
    }

    pub fn element_fidelity(&self, e: Element) -> Option<f64> {
        match e {
            Element::Single(q) => self.fidelity.single.get(q).copied(),
            Element::Measure(q) => self.fidelity.measure.get(q).copied(),
            Element::Two(a, b) => self.two_fidelity(a, b),
        }
    }

    pub fn element_baseline(&self, e: Element) -> Option<f64> {
        match e {
            Element::Single(q) => self.fidelity.baseline_single.get(q).copied(),
            Element::Measure(q) => self.fidelity.baseline_measure.get(q).copied(),
            Element::Two(a, b) => self
                .topology
                .edge_index(a, b)
                .map(|i| self.fidelity.baseline_two[i]),
        }
    }

    /// Every element in a fixed order: single, measure per qubit, then edges.
    pub fn elements(&self) -> Vec<Element> {
        let n = self.n_qubits();
        let mut out: Vec<Element> = (0..n).map(Element::Single).collect();
        out.extend((0..n).map(Element::Measure));
        out.extend(
            self.topology
                .edges()
                .iter()
                .map(|&(a, b)| Element::Two(a, b)),
        );
        out
    }

    /// `(element name, value)` for every element, for trace export.
    pub fn fidelity_rows(&self) -> Vec<(Element, f64)> {
        self.elements()
            .into_iter()
            .map(|e| (e, self.element_fidelity(e).expect("listed element exists")))
            .collect()
    }

    /// Relaxes every fidelity toward its floor over `dt` seconds, then applies
    /// the clamped log-normal jitter.
    pub fn apply_drift(&mut self, dt: i64) -> Result<(), QpuError> {
        if dt < 0 {
            return Err(QpuError::NegativeInterval(dt));
        }
        let sigma = self.drift.jitter_sigma;
        for class in [
            ElementClass::Single,
            ElementClass::Two,
            ElementClass::Measure,
        ] {
            let Decay { tau, floor } = self.drift.decay(class);
            let factor = (-(dt as f64) / tau).exp();
            let n = self.fidelity.class_mut(class).len();
            for i in 0..n {
                let jitter = if sigma > 0.0 {
                    let z: f64 = self.drift_rng.sample(StandardNormal);
                    (sigma * z).exp()
                } else {
                    1.0
                };
                let values = self.fidelity.class_mut(class);
                let f = values[i];
                let relaxed = floor + (f - floor) * factor;
                values[i] = (relaxed * jitter).clamp(floor, 1.0);
            }
        }
        self.fidelity.last_update += dt as u64;
        self.epoch += 1;
        Ok(())
    }

    /// Moves `targets` into the calibration region; everything else becomes executable.
    pub fn partition_regions(&mut self, targets: &BTreeSet<usize>) -> Result<(), QpuError> {
        for &q in targets {
            self.check_qubit(q)?;
            if self.status[q] != QubitStatus::Free {
                return Err(QpuError::WrongStatus {
                    qubit: q,
                    status: self.status[q],
                    expected: "free",
                });
            }
        }
        let in_progress: Vec<usize> = self
            .calibration_region
            .iter()
            .copied()
            .filter(|&q| self.status[q] == QubitStatus::Calibrating)
            .collect();
        if !in_progress.is_empty() {
            return Err(QpuError::CalibrationInProgress(in_progress));
        }
        for &q in targets {
            self.status[q] = QubitStatus::Calibrating;
        }
        self.calibration_region = targets.clone();
        Ok(())
    }

    /// Marks `qubits` busy if every one is free and executable. Nothing changes on refusal.
    pub fn allocate_qubits(&mut self, qubits: &BTreeSet<usize>) -> Result<(), AllocationRefusal> {
        let mut refusal = AllocationRefusal::default();
        for &q in qubits {
            if q >= self.n_qubits() {
                refusal.missing.push(q);
            } else if self.calibration_region.contains(&q) {
                refusal.in_calibration.push(q);
            } else if self.status[q] != QubitStatus::Free {
                refusal.busy.push(q);
            }
        }
        if !refusal.is_empty() {
            return Err(refusal);
        }
        for &q in qubits {
            self.status[q] = QubitStatus::Busy;
        }
        Ok(())
    }

    /// Frees busy or calibrating qubits; calibrating ones rejoin the executable region.
    pub fn release_qubits(&mut self, qubits: &BTreeSet<usize>) -> Result<(), QpuError> {
        for &q in qubits {
            self.check_qubit(q)?;
            if self.status[q] == QubitStatus::Free {
                return Err(QpuError::WrongStatus {
                    qubit: q,
                    status: QubitStatus::Free,
                    expected: "busy or calibrating",
                });
            }
        }
        for &q in qubits {
            self.status[q] = QubitStatus::Free;
            self.calibration_region.remove(&q);
        }
        Ok(())
    }

    /// Sets an element's current fidelity (clamped to `[0, 1]`).
    pub fn set_fidelity(&mut self, e: Element, value: f64) -> Result<(), QpuError> {
        let v = value.clamp(0.0, 1.0);
        match e {
            Element::Single(q) => {
                *self
                    .fidelity
                    .single
                    .get_mut(q)
                    .ok_or(QpuError::NoSuchQubit(q))? = v
            }
            Element::Measure(q) => {
                *self
                    .fidelity
                    .measure
                    .get_mut(q)
                    .ok_or(QpuError::NoSuchQubit(q))? = v
            }
            Element::Two(a, b) => {
                let i = self
                    .topology
                    .edge_index(a, b)
                    .ok_or_else(|| QpuError::Topology(format!("no coupler ({a},{b})")))?;
                self.fidelity.two[i] = v;
            }
        }
        self.epoch += 1;
        Ok(())
    }

    /// Uniform draw in `[lo, hi)` from the processor's restoration stream.
    pub fn restoration_factor(&mut self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            self.restore_rng.random_range(lo..hi)
        } else {
            lo
        }
    }

    fn check_qubit(&self, q: usize) -> Result<(), QpuError> {
        if q < self.n_qubits() {
            Ok(())
        } else {
            Err(QpuError::NoSuchQubit(q))
        }
    }
}

/// Why an allocation was refused.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AllocationRefusal {
    pub busy: Vec<usize>,
    pub in_calibration: Vec<usize>,
    pub missing: Vec<usize>,
}

impl AllocationRefusal {
    pub fn is_empty(&self) -> bool {
        self.busy.is_empty() && self.in_calibration.is_empty() && self.missing.is_empty()
    }
}

impl fmt::Display for AllocationRefusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "allocation refused (busy {:?}, calibrating {:?}, missing {:?})",
            self.busy, self.in_calibration, self.missing
        )
    }
}

impl std::error::Error for AllocationRefusal {}

/// Builds a processor from its declarative spec.
pub fn build_qpu(id: QpuId, spec: &QpuSpec) -> Result<QpuModel, QpuError> {
    let topology = spec.topology.build()?;
    let fidelity = spec.fidelity.build(&topology)?;
    let drift = spec.drift.build()?;
    QpuModel::new(id, topology, fidelity, drift)
}
