use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CircuitError;
use crate::linalg::{Matrix, C64, I, ONE, ZERO};

/// Gate catalog. Parameters are carried separately on [`Gate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    H,
    S,
    T,
    X,
    Y,
    Z,
    /// `U3(theta, phi, lambda)`.
    U3,
    Cnot,
    Cz,
    Swap,
    /// Controlled `e^{i gamma} U3(theta, phi, lambda)`; parameters `(theta, phi, lambda, gamma)`.
    Cu,
    Toffoli,
    /// Controlled phase `diag(1, 1, 1, e^{i theta})`.
    Cr,
    /// `iSWAP(theta)`.
    ISwap,
    Measure,
}

impl GateKind {
    pub const ALL: [GateKind; 15] = [
        GateKind::H,
        GateKind::S,
        GateKind::T,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::U3,
        GateKind::Cnot,
        GateKind::Cz,
        GateKind::Swap,
        GateKind::Cu,
        GateKind::Toffoli,
        GateKind::Cr,
        GateKind::ISwap,
        GateKind::Measure,
    ];

    /// Number of qubit operands.
    pub fn arity(self) -> usize {
        match self {
            GateKind::H
            | GateKind::S
            | GateKind::T
            | GateKind::X
            | GateKind::Y
            | GateKind::Z
            | GateKind::U3
            | GateKind::Measure => 1,
            GateKind::Cnot
            | GateKind::Cz
            | GateKind::Swap
            | GateKind::Cu
            | GateKind::Cr
            | GateKind::ISwap => 2,
            GateKind::Toffoli => 3,
        }
    }

    /// Number of real parameters.
    pub fn param_count(self) -> usize {
        match self {
            GateKind::U3 => 3,
            GateKind::Cu => 4,
            GateKind::Cr | GateKind::ISwap => 1,
            _ => 0,
        }
    }

    pub fn is_unitary(self) -> bool {
        self != GateKind::Measure
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::U3 => "U3",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
            GateKind::Swap => "SWAP",
            GateKind::Cu => "CU",
            GateKind::Toffoli => "TOFFOLI",
            GateKind::Cr => "CR",
            GateKind::ISwap => "ISWAP",
            GateKind::Measure => "MEASURE",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase();
        let kind = match upper.as_str() {
            "CX" => GateKind::Cnot,
            "CCX" => GateKind::Toffoli,
            "CP" | "CPHASE" => GateKind::Cr,
            "M" => GateKind::Measure,
            other => *GateKind::ALL
                .iter()
                .find(|k| k.name() == other)
                .ok_or_else(|| CircuitError::UnknownGate(s.to_string()))?,
        };
        Ok(kind)
    }
}

/// One gate application. `qubits[0]` is the control for controlled kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub params: Vec<f64>,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: impl Into<Vec<usize>>, params: impl Into<Vec<f64>>) -> Self {
        Gate {
            kind,
            qubits: qubits.into(),
            params: params.into(),
        }
    }

    pub fn single(kind: GateKind, q: usize) -> Self {
        Gate::new(kind, vec![q], Vec::new())
    }

    pub fn u3(q: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Gate::new(GateKind::U3, vec![q], vec![theta, phi, lambda])
    }

    pub fn two(kind: GateKind, a: usize, b: usize) -> Self {
        Gate::new(kind, vec![a, b], Vec::new())
    }

    pub fn is_two_qubit(&self) -> bool {
        self.kind.arity() == 2
    }

    /// The gate's unitary in the operand basis (`qubits[0]` most significant).
    pub fn matrix(&self) -> Result<Matrix, CircuitError> {
        gate_matrix(self.kind, &self.params)
    }
}

/// Returns the catalog unitary for `kind`.
pub fn gate_matrix(kind: GateKind, params: &[f64]) -> Result<Matrix, CircuitError> {
    if params.len() != kind.param_count() {
        return Err(CircuitError::WrongParamCount {
            kind,
            expected: kind.param_count(),
            got: params.len(),
        });
    }
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let m = match kind {
        GateKind::H => Matrix::from_rows(&[&[h, h], &[h, -h]]),
        GateKind::S => Matrix::diagonal(&[ONE, I]),
        GateKind::T => Matrix::diagonal(&[ONE, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
        GateKind::X => Matrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
        GateKind::Y => Matrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
        GateKind::Z => Matrix::diagonal(&[ONE, -ONE]),
        GateKind::U3 => u3_matrix(params[0], params[1], params[2]),
        GateKind::Cnot => Matrix::from_rows(&[
            &[ONE, ZERO, ZERO, ZERO],
            &[ZERO, ONE, ZERO, ZERO],
            &[ZERO, ZERO, ZERO, ONE],
            &[ZERO, ZERO, ONE, ZERO],
        ]),
        GateKind::Cz => Matrix::diagonal(&[ONE, ONE, ONE, -ONE]),
        GateKind::Swap => Matrix::from_rows(&[
            &[ONE, ZERO, ZERO, ZERO],
            &[ZERO, ZERO, ONE, ZERO],
            &[ZERO, ONE, ZERO, ZERO],
            &[ZERO, ZERO, ZERO, ONE],
        ]),
        GateKind::Cu => {
            let u =
                u3_matrix(params[0], params[1], params[2]).scale(C64::from_polar(1.0, params[3]));
            let mut m = Matrix::identity(4);
            for r in 0..2 {
                for c in 0..2 {
                    m[(2 + r, 2 + c)] = u[(r, c)];
                }
            }
            m
        }
        GateKind::Toffoli => {
            let mut m = Matrix::identity(8);
            m[(6, 6)] = ZERO;
            m[(7, 7)] = ZERO;
            m[(6, 7)] = ONE;
            m[(7, 6)] = ONE;
            m
        }
        GateKind::Cr => Matrix::diagonal(&[ONE, ONE, ONE, C64::from_polar(1.0, params[0])]),
        GateKind::ISwap => {
            let c = C64::new((params[0] / 2.0).cos(), 0.0);
            let s = I * (params[0] / 2.0).sin();
            Matrix::from_rows(&[
                &[ONE, ZERO, ZERO, ZERO],
                &[ZERO, c, s, ZERO],
                &[ZERO, s, c, ZERO],
                &[ZERO, ZERO, ZERO, ONE],
            ])
        }
        GateKind::Measure => return Err(CircuitError::NotUnitary(kind)),
    };
    Ok(m)
}

fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Matrix {
    let (s, c) = (theta / 2.0).sin_cos();
    Matrix::from_rows(&[
        &[C64::new(c, 0.0), -C64::from_polar(s, lambda)],
        &[C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
    ])
}
