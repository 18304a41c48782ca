use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Decay, DriftParams, FidelityState, QpuError, Topology};

/// Declarative processor description, as read from a TOML config.
///
/// ```toml
/// topology = { kind = "grid", rows = 2, cols = 4 }
///
/// [fidelity]
/// single = 0.90          # scalar, or one value per qubit
/// two = 0.88             # scalar, or one value per edge (sorted edge order)
/// measure = 0.97
///
/// [[fidelity.region]]    # optional overrides for a qubit subset
/// qubits = [2, 3, 6, 7]
/// single = 0.99
/// two = 0.97             # applies to edges with both ends in the subset
///
/// [drift]
/// single = { tau = 14400, floor = 0.85 }
/// two = { tau = 14400, floor = 0.70 }
/// jitter_sigma = 0.0
/// seed = 1
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpuSpec {
    pub topology: TopologySpec,
    pub fidelity: FidelitySpec,
    #[serde(default)]
    pub drift: DriftSpec,
}

impl QpuSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, QpuError> {
        toml::from_str(s).map_err(|e| QpuError::Config(e.to_string()))
    }

    /// Grid with the same fidelity for every element and no drift.
    pub fn uniform_grid(rows: usize, cols: usize, single: f64, two: f64, measure: f64) -> Self {
        QpuSpec {
            topology: TopologySpec::Grid { rows, cols },
            fidelity: FidelitySpec {
                single: ElementValues::Uniform(single),
                two: ElementValues::Uniform(two),
                measure: ElementValues::Uniform(measure),
                region: Vec::new(),
            },
            drift: DriftSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    Grid {
        rows: usize,
        cols: usize,
    },
    Line {
        n: usize,
    },
    Ring {
        n: usize,
    },
    Edges {
        n_qubits: usize,
        edges: Vec<(usize, usize)>,
    },
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology, QpuError> {
        match self {
            TopologySpec::Grid { rows, cols } => Topology::grid(*rows, *cols),
            TopologySpec::Line { n } => Topology::line(*n),
            TopologySpec::Ring { n } => Topology::ring(*n),
            TopologySpec::Edges { n_qubits, edges } => Topology::new(*n_qubits, edges.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementValues {
    Uniform(f64),
    PerElement(Vec<f64>),
}

impl ElementValues {
    fn expand(&self, count: usize, what: &str) -> Result<Vec<f64>, QpuError> {
        match self {
            ElementValues::Uniform(v) => Ok(vec![*v; count]),
            ElementValues::PerElement(vs) if vs.len() == count => Ok(vs.clone()),
            ElementValues::PerElement(vs) => Err(QpuError::Fidelity(format!(
                "{what}: expected {count} values, got {}",
                vs.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelitySpec {
    pub single: ElementValues,
    pub two: ElementValues,
    pub measure: ElementValues,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub region: Vec<FidelityOverride>,
}

/// Overrides for a qubit subset; later entries win.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityOverride {
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<f64>,
}

impl FidelitySpec {
    pub fn build(&self, topo: &Topology) -> Result<FidelityState, QpuError> {
        let n = topo.n_qubits();
        let mut single = self.single.expand(n, "single")?;
        let mut two = self.two.expand(topo.edges().len(), "two")?;
        let mut measure = self.measure.expand(n, "measure")?;
        for o in &self.region {
            let set: BTreeSet<usize> = o.qubits.iter().copied().collect();
            if let Some(&q) = set.iter().find(|&&q| q >= n) {
                return Err(QpuError::NoSuchQubit(q));
            }
            for &q in &set {
                if let Some(v) = o.single {
                    single[q] = v;
                }
                if let Some(v) = o.measure {
                    measure[q] = v;
                }
            }
            if let Some(v) = o.two {
                for (i, (a, b)) in topo.edges().iter().enumerate() {
                    if set.contains(a) && set.contains(b) {
                        two[i] = v;
                    }
                }
            }
        }
        for (name, vals) in [("single", &single), ("two", &two), ("measure", &measure)] {
            if let Some(v) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(QpuError::Fidelity(format!(
                    "{name} fidelity {v} outside [0, 1]"
                )));
            }
        }
        Ok(FidelityState::new(single, two, measure))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub tau: f64,
    pub floor: f64,
}

/// Absent classes do not drift.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single: Option<DecaySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two: Option<DecaySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<DecaySpec>,
    #[serde(default)]
    pub jitter_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DriftSpec {
    pub fn build(&self) -> Result<DriftParams, QpuError> {
        let decay = |d: Option<DecaySpec>| {
            d.map_or(Decay::STATIC, |d| Decay {
                tau: d.tau,
                floor: d.floor,
            })
        };
        let params = DriftParams {
            single: decay(self.single),
            two: decay(self.two),
            measure: decay(self.measure),
            jitter_sigma: self.jitter_sigma,
            seed: self.seed,
        };
        params.validate()?;
        Ok(params)
    }
}
