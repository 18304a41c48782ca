use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Circuit, CircuitError};

/// Oracle for Deutsch–Jozsa. The balanced oracle is `f(x) = x_0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DjOracle {
    ConstantZero,
    ConstantOne,
    Balanced,
}

/// Benchmark families. For DJ and BV the last qubit is the ancilla, so
/// `n_qubits` counts inputs plus one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Benchmark {
    Qft,
    Ghz,
    DeutschJozsa(DjOracle),
    /// Secret bit `i` belongs to input qubit `i`.
    BernsteinVazirani(Vec<bool>),
}

impl Benchmark {
    /// Bernstein–Vazirani with the all-ones secret for `n_qubits` total qubits.
    pub fn bv_all_ones(n_qubits: usize) -> Self {
        Benchmark::BernsteinVazirani(vec![true; n_qubits.saturating_sub(1)])
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Benchmark::Qft => f.write_str("qft"),
            Benchmark::Ghz => f.write_str("ghz"),
            Benchmark::DeutschJozsa(DjOracle::Balanced) => f.write_str("dj"),
            Benchmark::DeutschJozsa(DjOracle::ConstantZero) => f.write_str("dj-const0"),
            Benchmark::DeutschJozsa(DjOracle::ConstantOne) => f.write_str("dj-const1"),
            Benchmark::BernsteinVazirani(s) => {
                let bits: String = s.iter().map(|&b| if b { '1' } else { '0' }).collect();
                write!(f, "bv:{bits}")
            }
        }
    }
}

impl FromStr for Benchmark {
    type Err = CircuitError;

    /// Accepts `qft`, `ghz`, `dj`, `dj-const0`, `dj-const1`, `bv:<bits>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "qft" => Benchmark::Qft,
            "ghz" => Benchmark::Ghz,
            "dj" => Benchmark::DeutschJozsa(DjOracle::Balanced),
            "dj-const0" => Benchmark::DeutschJozsa(DjOracle::ConstantZero),
            "dj-const1" => Benchmark::DeutschJozsa(DjOracle::ConstantOne),
            other => {
                let bits = other
                    .strip_prefix("bv:")
                    .ok_or_else(|| CircuitError::UnknownBenchmark(s.to_string()))?;
                let secret = bits
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        _ => Err(CircuitError::UnknownBenchmark(s.to_string())),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Benchmark::BernsteinVazirani(secret)
            }
        })
    }
}

/// Textbook constructions. Data qubits are measured at the end.
pub fn generate_benchmark(kind: &Benchmark, n_qubits: usize) -> Result<Circuit, CircuitError> {
    let mut c = Circuit::new(n_qubits);
    match kind {
        Benchmark::Ghz => {
            if n_qubits < 2 {
                return Err(CircuitError::UnsupportedSize(format!(
                    "GHZ needs at least 2 qubits, got {n_qubits}"
                )));
            }
            c.h(0);
            for q in 1..n_qubits {
                c.cnot(q - 1, q);
            }
            c.measure_all();
        }
        Benchmark::Qft => {
            if n_qubits < 1 {
                return Err(CircuitError::UnsupportedSize("QFT needs a qubit".into()));
            }
            for j in 0..n_qubits {
                c.h(j);
                for k in j + 1..n_qubits {
                    c.cr(k, j, PI / f64::from(1u32 << (k - j)));
                }
            }
            c.measure_all();
        }
        Benchmark::DeutschJozsa(oracle) => {
            let anc = oracle_prologue(&mut c, n_qubits, "Deutsch-Jozsa")?;
            match oracle {
                DjOracle::ConstantZero => {}
                DjOracle::ConstantOne => {
                    c.x(anc);
                }
                DjOracle::Balanced => {
                    c.cnot(0, anc);
                }
            }
            oracle_epilogue(&mut c, anc);
        }
        Benchmark::BernsteinVazirani(secret) => {
            if secret.len() + 1 != n_qubits {
                return Err(CircuitError::UnsupportedSize(format!(
                    "secret of {} bits needs {} qubits, got {n_qubits}",
                    secret.len(),
                    secret.len() + 1
                )));
            }
            let anc = oracle_prologue(&mut c, n_qubits, "Bernstein-Vazirani")?;
            for (i, _) in secret.iter().enumerate().filter(|(_, &b)| b) {
                c.cnot(i, anc);
            }
            oracle_epilogue(&mut c, anc);
        }
    }
    Ok(c)
}

fn oracle_prologue(c: &mut Circuit, n_qubits: usize, name: &str) -> Result<usize, CircuitError> {
    if n_qubits < 2 {
        return Err(CircuitError::UnsupportedSize(format!(
            "{name} needs at least one input plus an ancilla, got {n_qubits} qubit(s)"
        )));
    }
    let anc = n_qubits - 1;
    c.x(anc);
    for q in 0..n_qubits {
        c.h(q);
    }
    Ok(anc)
}

fn oracle_epilogue(c: &mut Circuit, anc: usize) {
    for q in 0..anc {
        c.h(q);
    }
    for q in 0..anc {
        c.measure(q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;

    #[test]
    fn qft_gate_counts() {
        for n in 1..=6 {
            let c = generate_benchmark(&Benchmark::Qft, n).unwrap();
            assert_eq!(c.count_kind(GateKind::H), n);
            assert_eq!(c.count_kind(GateKind::Cr), n * (n - 1) / 2);
        }
    }

    #[test]
    fn ghz_shape() {
        let c = generate_benchmark(&Benchmark::Ghz, 4).unwrap();
        assert_eq!(c.count_kind(GateKind::Cnot), 3);
        assert_eq!(c.measured_qubits(), vec![0, 1, 2, 3]);
        assert!(generate_benchmark(&Benchmark::Ghz, 1).is_err());
    }

    #[test]
    fn bv_secret_controls_oracle() {
        let c = generate_benchmark(&"bv:101".parse().unwrap(), 4).unwrap();
        assert_eq!(c.count_kind(GateKind::Cnot), 2);
        assert_eq!(c.measured_qubits(), vec![0, 1, 2]);
        assert!(generate_benchmark(&"bv:101".parse().unwrap(), 3).is_err());
    }

    #[test]
    fn dj_variants() {
        let bal = generate_benchmark(&Benchmark::DeutschJozsa(DjOracle::Balanced), 4).unwrap();
        assert_eq!(bal.count_kind(GateKind::Cnot), 1);
        let one = generate_benchmark(&Benchmark::DeutschJozsa(DjOracle::ConstantOne), 3).unwrap();
        assert_eq!(one.count_kind(GateKind::Cnot), 0);
        assert_eq!(one.count_kind(GateKind::X), 2);
    }

    #[test]
    fn names_round_trip() {
        for s in ["qft", "ghz", "dj", "dj-const0", "dj-const1", "bv:0110"] {
            assert_eq!(s.parse::<Benchmark>().unwrap().to_string(), s);
        }
        assert!("bv:12".parse::<Benchmark>().is_err());
    }
}
