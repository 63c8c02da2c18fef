//! Dense statevector simulation.
//!
//! Basis index `i` of an `n`-qubit state encodes qubit `q` in bit
//! `n − 1 − q`, so qubit 0 is the most significant (leftmost) bit of the
//! ket label and ancillas, which come last in the register, are the least
//! significant bits.

mod dump;
mod equiv;
mod oracle;
mod sparse;

use num_complex::Complex64;
use rand::{Rng, RngExt};
use thiserror::Error;

use crate::circuit::{Circuit, Gate, Matrix2, Qubit};

pub use dump::{probability_csv, read_dump, write_dump};
pub use equiv::{unitary_equiv, EquivDomain, EquivMode, EquivOptions, EquivReport};
pub use oracle::{OracleBindings, PhaseOracleSpec};
pub use sparse::{SparseState, SPARSE_MAX_QUBITS};

/// Statevectors above this many qubits are refused.
pub const MAX_QUBITS: usize = 28;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("no oracle bound to tag {0:?}")]
    UnboundOracle(String),
    #[error("oracle {tag:?} expects {expected} input qubits, gate lists {found}")]
    OracleWidth { tag: String, expected: usize, found: usize },
    #[error("register mismatch: {0}")]
    RegisterMismatch(String),
    #[error("{0} qubits exceeds the simulator limit of {MAX_QUBITS}")]
    TooLarge(usize),
    #[error("amplitude vector invalid: {0}")]
    BadAmplitudes(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl Statevector {
    /// |0…0⟩.
    pub fn zero_state(num_qubits: usize) -> Result<Self, SimError> {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self, SimError> {
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooLarge(num_qubits));
        }
        let mut amps = vec![zero(); 1 << num_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector { num_qubits, amps })
    }

    /// The uniform superposition |u_n⟩.
    pub fn uniform(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooLarge(num_qubits));
        }
        let a = (1u64 << num_qubits) as f64;
        Ok(Statevector { num_qubits, amps: vec![Complex64::new(a.sqrt().recip(), 0.0); 1 << num_qubits] })
    }

    /// Validates length (a power of two) and unit norm within 1e-9.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        if !amps.len().is_power_of_two() {
            return Err(SimError::BadAmplitudes(format!("length {} is not a power of two", amps.len())));
        }
        let num_qubits = amps.len().trailing_zeros() as usize;
        let s = Statevector { num_qubits, amps };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(SimError::BadAmplitudes(format!("squared norm {norm}")));
        }
        Ok(s)
    }

    /// A random unit vector (uniform box components, normalized).
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<Self, SimError> {
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooLarge(num_qubits));
        }
        let mut amps: Vec<Complex64> = (0..1usize << num_qubits)
            .map(|_| Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Statevector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude_at(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// ‖self − other‖₂.
    pub fn distance(&self, other: &Statevector) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Value of the listed qubits in basis state `index`, first listed
    /// qubit most significant.
    pub fn extract(&self, index: usize, qubits: &[Qubit]) -> u64 {
        qubits.iter().fold(0u64, |acc, q| (acc << 1) | ((index >> self.pos(*q)) & 1) as u64)
    }

    /// Probability that measuring `measured` yields a value satisfying
    /// `predicate`.
    pub fn success_probability(&self, measured: &[Qubit], predicate: impl Fn(u64) -> bool) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| predicate(self.extract(*i, measured)))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Outcome distribution of measuring `measured` (length `2^|measured|`).
    pub fn marginal(&self, measured: &[Qubit]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << measured.len()];
        for (i, a) in self.amps.iter().enumerate() {
            out[self.extract(i, measured) as usize] += a.norm_sqr();
        }
        out
    }

    /// Embeds into a register with `extra` more ancillas, all |0⟩.
    pub fn with_zero_ancillas(&self, extra: usize) -> Result<Statevector, SimError> {
        let n = self.num_qubits + extra;
        if n > MAX_QUBITS {
            return Err(SimError::TooLarge(n));
        }
        let mut amps = vec![zero(); 1 << n];
        for (i, a) in self.amps.iter().enumerate() {
            amps[i << extra] = *a;
        }
        Ok(Statevector { num_qubits: n, amps })
    }

    fn pos(&self, q: Qubit) -> usize {
        self.num_qubits - 1 - q.0
    }

    fn mask(&self, qs: &[Qubit]) -> usize {
        qs.iter().fold(0, |m, q| m | 1 << self.pos(*q))
    }

    pub fn apply_gate(&mut self, gate: &Gate, oracles: &OracleBindings) -> Result<(), SimError> {
        if let Some(q) = gate.qubits().iter().find(|q| q.0 >= self.num_qubits) {
            return Err(SimError::RegisterMismatch(format!("{q} outside a {}-qubit state", self.num_qubits)));
        }
        match gate {
            Gate::X(q) => {
                let b = 1 << self.pos(*q);
                for i in 0..self.amps.len() {
                    if i & b == 0 {
                        self.amps.swap(i, i | b);
                    }
                }
            }
            Gate::Z(q) => self.negate_where(self.mask(&[*q])),
            Gate::MultiControlledZ(qs) => self.negate_where(self.mask(qs)),
            Gate::Cx { control, target } => self.controlled_swap(self.mask(&[*control]), 1 << self.pos(*target)),
            Gate::Ccx { c1, c2, target } => self.controlled_swap(self.mask(&[*c1, *c2]), 1 << self.pos(*target)),
            Gate::Diffuser(qs) => self.diffuse(qs),
            Gate::OracleCall { tag, qubits } => {
                let spec = oracles.get(tag).ok_or_else(|| SimError::UnboundOracle(tag.clone()))?;
                if spec.num_qubits() != qubits.len() {
                    return Err(SimError::OracleWidth {
                        tag: tag.clone(),
                        expected: spec.num_qubits(),
                        found: qubits.len(),
                    });
                }
                self.apply_phase_oracle(qubits, spec);
            }
            g => {
                let m = g.one_qubit_matrix().expect("remaining kinds are one-qubit");
                self.apply_matrix(g.qubits()[0], &m);
            }
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit, oracles: &OracleBindings) -> Result<(), SimError> {
        if circuit.num_qubits() != self.num_qubits {
            return Err(SimError::RegisterMismatch(format!(
                "{}-qubit circuit on a {}-qubit state",
                circuit.num_qubits(),
                self.num_qubits
            )));
        }
        for g in circuit.gates() {
            self.apply_gate(g, oracles)?;
        }
        Ok(())
    }

    fn apply_matrix(&mut self, q: Qubit, m: &Matrix2) {
        let b = 1 << self.pos(q);
        for i in 0..self.amps.len() {
            if i & b == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | b]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | b] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn negate_where(&mut self, mask: usize) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a = -*a;
            }
        }
    }

    fn controlled_swap(&mut self, controls: usize, target: usize) {
        for i in 0..self.amps.len() {
            if i & controls == controls && i & target == 0 {
                self.amps.swap(i, i | target);
            }
        }
    }

    /// 2|u⟩⟨u| − I on the listed qubits: each block of amplitudes sharing the
    /// other qubits is reflected about its mean.
    fn diffuse(&mut self, qs: &[Qubit]) {
        let mask = self.mask(qs);
        let offsets: Vec<usize> = (0..1usize << qs.len())
            .map(|v| qs.iter().enumerate().fold(0, |acc, (j, q)| acc | ((v >> (qs.len() - 1 - j)) & 1) << self.pos(*q)))
            .collect();
        let scale = 2.0 / offsets.len() as f64;
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            let sum: Complex64 = offsets.iter().map(|o| self.amps[base | o]).sum();
            let twice_mean = sum * scale;
            for o in &offsets {
                let a = &mut self.amps[base | o];
                *a = twice_mean - *a;
            }
        }
    }

    fn apply_phase_oracle(&mut self, qubits: &[Qubit], spec: &PhaseOracleSpec) {
        let n = self.num_qubits;
        let w = qubits.len();
        let prefix = qubits.iter().enumerate().all(|(j, q)| q.0 == j);
        let table = spec.table_if_small();
        for i in 0..self.amps.len() {
            let x = if prefix { (i >> (n - w)) as u64 } else { self.extract(i, qubits) };
            let marked = match table {
                Some(t) => t[x as usize],
                None => spec.is_marked(x),
            };
            if marked {
                self.amps[i] = -self.amps[i];
            }
        }
    }
}
