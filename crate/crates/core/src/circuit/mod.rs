//! Circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered gate list over a register of `num_main` main
//! qubits followed by `num_ancilla` ancillas. Index 0 of the gate list acts
//! first. Gates come in two tiers: *basic* gates (one-qubit unitaries and CX)
//! and *logical* gates (CCX, diffusers, multi-controlled Z and oracle calls)
//! which [`decompose_to_basic`] lowers.

mod analysis;
mod classical;
mod decompose;
mod format;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{acts_on, count_gates, depends_on, depends_on_any, CountLevel, GateCountReport};
pub use classical::{eval_classical, BasisState};
pub use decompose::{basic_size, decompose_to_basic, AncillaPolicy};
pub use format::{parse_json, parse_text, to_json, to_qasm, to_text, ParseError};

/// A 2×2 complex matrix, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

/// Tolerance used when deciding whether a one-qubit matrix is the identity
/// (up to global phase) or unitary.
pub const MATRIX_TOL: f64 = 1e-12;

/// Position of a qubit in its circuit's register. Main qubits come first.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Qubit(pub usize);

impl Qubit {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Shorthand for a list of consecutive qubits `start..end`.
pub fn qubit_range(start: usize, end: usize) -> Vec<Qubit> {
    (start..end).map(Qubit).collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Basic,
    Logical,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// Arbitrary one-qubit unitary.
    OneQubit { target: Qubit, matrix: Matrix2, label: String },
    X(Qubit),
    Z(Qubit),
    H(Qubit),
    Ry { target: Qubit, angle: f64 },
    Cx { control: Qubit, target: Qubit },
    Ccx { c1: Qubit, c2: Qubit, target: Qubit },
    /// The mixing operator `2|u⟩⟨u| − I` on the listed qubits.
    Diffuser(Vec<Qubit>),
    /// Phase −1 on the all-ones state of the listed qubits.
    MultiControlledZ(Vec<Qubit>),
    /// A call to a phase oracle bound at simulation time under `tag`. The
    /// first listed qubit carries the most significant bit of the oracle
    /// input.
    OracleCall { tag: String, qubits: Vec<Qubit> },
}

impl Gate {
    pub fn one_qubit(target: Qubit, matrix: Matrix2, label: impl Into<String>) -> Self {
        Gate::OneQubit { target, matrix, label: label.into() }
    }

    pub fn cx(control: Qubit, target: Qubit) -> Self {
        Gate::Cx { control, target }
    }

    pub fn ccx(c1: Qubit, c2: Qubit, target: Qubit) -> Self {
        Gate::Ccx { c1, c2, target }
    }

    pub fn ry(target: Qubit, angle: f64) -> Self {
        Gate::Ry { target, angle }
    }

    pub fn oracle(tag: impl Into<String>, qubits: Vec<Qubit>) -> Self {
        Gate::OracleCall { tag: tag.into(), qubits }
    }

    /// Qubits referenced by the gate, in gate-specific order (controls before
    /// targets).
    pub fn qubits(&self) -> Vec<Qubit> {
        match self {
            Gate::OneQubit { target, .. } | Gate::Ry { target, .. } => vec![*target],
            Gate::X(q) | Gate::Z(q) | Gate::H(q) => vec![*q],
            Gate::Cx { control, target } => vec![*control, *target],
            Gate::Ccx { c1, c2, target } => vec![*c1, *c2, *target],
            Gate::Diffuser(qs) | Gate::MultiControlledZ(qs) => qs.clone(),
            Gate::OracleCall { qubits, .. } => qubits.clone(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Gate::OneQubit { .. } => "U",
            Gate::X(_) => "X",
            Gate::Z(_) => "Z",
            Gate::H(_) => "H",
            Gate::Ry { .. } => "RY",
            Gate::Cx { .. } => "CX",
            Gate::Ccx { .. } => "CCX",
            Gate::Diffuser(_) => "DIFF",
            Gate::MultiControlledZ(_) => "MCZ",
            Gate::OracleCall { .. } => "ORACLE",
        }
    }

    pub fn tier(&self) -> Tier {
        match self {
            Gate::OneQubit { .. } | Gate::X(_) | Gate::Z(_) | Gate::H(_) | Gate::Ry { .. } | Gate::Cx { .. } => {
                Tier::Basic
            }
            Gate::Ccx { .. } | Gate::Diffuser(_) | Gate::MultiControlledZ(_) | Gate::OracleCall { .. } => {
                Tier::Logical
            }
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, Gate::OracleCall { .. })
    }

    /// The 2×2 matrix of a one-qubit gate, `None` for multi-qubit kinds.
    pub fn one_qubit_matrix(&self) -> Option<Matrix2> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Gate::OneQubit { matrix, .. } => Some(*matrix),
            Gate::X(_) => Some([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]),
            Gate::Z(_) => Some([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]),
            Gate::H(_) => Some([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]]),
            Gate::Ry { angle, .. } => {
                let (sn, cs) = (angle / 2.0).sin_cos();
                Some([[c(cs, 0.0), c(-sn, 0.0)], [c(sn, 0.0), c(cs, 0.0)]])
            }
            _ => None,
        }
    }

    /// Inverse gate. Every kind except generic one-qubit unitaries and RY is
    /// self-inverse.
    pub fn inverse(&self) -> Gate {
        match self {
            Gate::OneQubit { target, matrix, label } => {
                let dagger = [
                    [matrix[0][0].conj(), matrix[1][0].conj()],
                    [matrix[0][1].conj(), matrix[1][1].conj()],
                ];
                let label = match label.strip_suffix("_dg") {
                    Some(base) => base.to_string(),
                    None => format!("{label}_dg"),
                };
                Gate::OneQubit { target: *target, matrix: dagger, label }
            }
            Gate::Ry { target, angle } => Gate::Ry { target: *target, angle: -angle },
            other => other.clone(),
        }
    }

    /// Same gate with every qubit passed through `map`.
    pub fn remap(&self, map: impl Fn(Qubit) -> Qubit) -> Gate {
        match self {
            Gate::OneQubit { target, matrix, label } => {
                Gate::OneQubit { target: map(*target), matrix: *matrix, label: label.clone() }
            }
            Gate::X(q) => Gate::X(map(*q)),
            Gate::Z(q) => Gate::Z(map(*q)),
            Gate::H(q) => Gate::H(map(*q)),
            Gate::Ry { target, angle } => Gate::Ry { target: map(*target), angle: *angle },
            Gate::Cx { control, target } => Gate::Cx { control: map(*control), target: map(*target) },
            Gate::Ccx { c1, c2, target } => Gate::Ccx { c1: map(*c1), c2: map(*c2), target: map(*target) },
            Gate::Diffuser(qs) => Gate::Diffuser(qs.iter().copied().map(&map).collect()),
            Gate::MultiControlledZ(qs) => Gate::MultiControlledZ(qs.iter().copied().map(&map).collect()),
            Gate::OracleCall { tag, qubits } => {
                Gate::OracleCall { tag: tag.clone(), qubits: qubits.iter().copied().map(&map).collect() }
            }
        }
    }

    fn check(&self, num_qubits: usize) -> Result<(), CircuitError> {
        let qs = self.qubits();
        if qs.is_empty() {
            return Err(CircuitError::EmptyGate(self.kind()));
        }
        for (i, q) in qs.iter().enumerate() {
            if q.0 >= num_qubits {
                return Err(CircuitError::QubitOutOfRange { qubit: q.0, size: num_qubits });
            }
            if qs[..i].contains(q) {
                return Err(CircuitError::DuplicateQubit { qubit: q.0, kind: self.kind() });
            }
        }
        match self {
            Gate::OneQubit { matrix, label, .. } => {
                if !is_unitary(matrix) {
                    return Err(CircuitError::NotUnitary);
                }
                check_token(label)?;
            }
            Gate::OracleCall { tag, .. } => check_token(tag)?,
            Gate::Ry { angle, .. } if !angle.is_finite() => return Err(CircuitError::NotUnitary),
            _ => {}
        }
        Ok(())
    }
}

fn check_token(s: &str) -> Result<(), CircuitError> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '#' || c == '"') {
        return Err(CircuitError::BadToken(s.to_string()));
    }
    Ok(())
}

pub(crate) fn is_unitary(m: &Matrix2) -> bool {
    // M M† = I
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in m[i].iter().zip(&m[j]) {
                acc += a * b.conj();
            }
            let expected = if i == j { 1.0 } else { 0.0 };
            if (acc - Complex64::new(expected, 0.0)).norm() > MATRIX_TOL {
                return false;
            }
        }
    }
    true
}

pub(crate) fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for a register of {size} qubits")]
    QubitOutOfRange { qubit: usize, size: usize },
    #[error("qubit {qubit} repeated within one {kind} gate")]
    DuplicateQubit { qubit: usize, kind: &'static str },
    #[error("{0} gate without qubits")]
    EmptyGate(&'static str),
    #[error("one-qubit matrix is not unitary within 1e-12")]
    NotUnitary,
    #[error("labels and tags must be non-empty and free of whitespace, '#' and '\"': {0:?}")]
    BadToken(String),
    #[error("register mismatch: {0}")]
    RegisterMismatch(String),
    #[error("ancilla budget exhausted: need {needed} clean ancillas, {available} certified")]
    AncillaBudget { needed: usize, available: usize },
    #[error("gate {0} is not a basic gate and cannot be exported")]
    NotBasic(&'static str),
}

/// An ordered gate list over `num_main + num_ancilla` qubits.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Circuit {
    num_main: usize,
    num_ancilla: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_main: usize, num_ancilla: usize) -> Self {
        Circuit { num_main, num_ancilla, gates: Vec::new() }
    }

    /// Builds a circuit from a gate list, validating every gate.
    pub fn from_gates(num_main: usize, num_ancilla: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        let size = num_main + num_ancilla;
        for g in &gates {
            g.check(size)?;
        }
        Ok(Circuit { num_main, num_ancilla, gates })
    }

    pub fn num_main(&self) -> usize {
        self.num_main
    }

    pub fn num_ancilla(&self) -> usize {
        self.num_ancilla
    }

    pub fn num_qubits(&self) -> usize {
        self.num_main + self.num_ancilla
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn main_qubits(&self) -> Vec<Qubit> {
        qubit_range(0, self.num_main)
    }

    pub fn ancilla_qubits(&self) -> Vec<Qubit> {
        qubit_range(self.num_main, self.num_qubits())
    }

    /// Appends a gate.
    ///
    /// # Panics
    ///
    /// Panics if the gate is malformed for this register; library builders
    /// only produce well-formed gates, external input goes through
    /// [`Circuit::try_push`].
    pub fn push(&mut self, gate: Gate) {
        if let Err(e) = gate.check(self.num_qubits()) {
            panic!("invalid gate {gate:?}: {e}");
        }
        self.gates.push(gate);
    }

    pub fn try_push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.check(self.num_qubits())?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends all gates of `other`, which must not use more qubits than
    /// `self`.
    pub fn append(&mut self, other: &Circuit) {
        assert!(
            other.num_qubits() <= self.num_qubits(),
            "appending a {}-qubit circuit to a {}-qubit register",
            other.num_qubits(),
            self.num_qubits()
        );
        self.gates.extend(other.gates.iter().cloned());
    }

    /// Appends the inverse of `other`.
    pub fn append_inverse(&mut self, other: &Circuit) {
        assert!(other.num_qubits() <= self.num_qubits());
        self.gates.extend(other.gates.iter().rev().map(Gate::inverse));
    }

    /// Grows the ancilla register; existing gates are unaffected.
    pub fn with_ancillas(mut self, num_ancilla: usize) -> Self {
        assert!(num_ancilla >= self.num_ancilla);
        self.num_ancilla = num_ancilla;
        self
    }

    /// Reverses gate order and inverts every gate.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            num_main: self.num_main,
            num_ancilla: self.num_ancilla,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// `a` followed by `b` (time order). Registers must match.
    pub fn compose(a: &Circuit, b: &Circuit) -> Result<Circuit, CircuitError> {
        if a.num_main != b.num_main || a.num_ancilla != b.num_ancilla {
            return Err(CircuitError::RegisterMismatch(format!(
                "({}, {}) vs ({}, {})",
                a.num_main, a.num_ancilla, b.num_main, b.num_ancilla
            )));
        }
        let mut out = a.clone();
        out.gates.extend(b.gates.iter().cloned());
        Ok(out)
    }

    /// Sub-circuit made of gates `start..end`, on the same register.
    pub fn slice(&self, start: usize, end: usize) -> Circuit {
        Circuit { num_main: self.num_main, num_ancilla: self.num_ancilla, gates: self.gates[start..end].to_vec() }
    }

    pub fn oracle_calls(&self) -> usize {
        self.gates.iter().filter(|g| g.is_oracle()).count()
    }

    /// Every gate with its qubits passed through `map`, on a new register.
    pub fn remap(&self, num_main: usize, num_ancilla: usize, map: impl Fn(Qubit) -> Qubit) -> Circuit {
        let mut out = Circuit::new(num_main, num_ancilla);
        for g in &self.gates {
            out.push(g.remap(&map));
        }
        out
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for g in &self.gates {
            g.check(self.num_qubits())?;
        }
        Ok(())
    }
}

impl Extend<Gate> for Circuit {
    fn extend<T: IntoIterator<Item = Gate>>(&mut self, iter: T) {
        for g in iter {
            self.push(g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_reverses_and_daggers() {
        let mut c = Circuit::new(2, 0);
        c.push(Gate::cx(Qubit(0), Qubit(1)));
        c.push(Gate::X(Qubit(0)));
        let inv = c.inverse();
        assert_eq!(inv.gates(), &[Gate::X(Qubit(0)), Gate::cx(Qubit(0), Qubit(1))]);

        let mut h = Circuit::new(1, 0);
        h.push(Gate::H(Qubit(0)));
        assert_eq!(h.inverse(), h);
    }

    #[test]
    fn double_inverse_is_identity_gate_for_gate() {
        let t = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut c = Circuit::new(3, 1);
        c.push(Gate::one_qubit(Qubit(2), [[one, zero], [zero, t]], "T"));
        c.push(Gate::ry(Qubit(1), 0.3));
        c.push(Gate::ccx(Qubit(0), Qubit(1), Qubit(3)));
        c.push(Gate::Diffuser(vec![Qubit(0), Qubit(1)]));
        c.push(Gate::oracle("O", qubit_range(0, 3)));
        assert_eq!(c.inverse().inverse(), c);
        match &c.inverse().gates()[4] {
            Gate::OneQubit { label, .. } => assert_eq!(label, "T_dg"),
            g => panic!("unexpected {g:?}"),
        }
    }

    #[test]
    fn rejects_malformed_gates() {
        let mut c = Circuit::new(2, 0);
        assert_eq!(
            c.try_push(Gate::cx(Qubit(0), Qubit(0))),
            Err(CircuitError::DuplicateQubit { qubit: 0, kind: "CX" })
        );
        assert_eq!(c.try_push(Gate::X(Qubit(2))), Err(CircuitError::QubitOutOfRange { qubit: 2, size: 2 }));
        let bad = [[Complex64::new(2.0, 0.0); 2]; 2];
        assert_eq!(c.try_push(Gate::one_qubit(Qubit(0), bad, "B")), Err(CircuitError::NotUnitary));
        assert!(matches!(c.try_push(Gate::oracle("has space", vec![Qubit(0)])), Err(CircuitError::BadToken(_))));
    }

    #[test]
    fn compose_requires_same_register() {
        let a = Circuit::new(2, 0);
        let b = Circuit::new(2, 1);
        assert!(Circuit::compose(&a, &b).is_err());
        assert!(Circuit::compose(&a, &a).is_ok());
    }
}
