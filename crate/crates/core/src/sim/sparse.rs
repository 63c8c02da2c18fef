use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use super::{OracleBindings, SimError, Statevector};
use crate::circuit::{Circuit, Gate, Matrix2, Qubit};

/// Largest register a sparse state can index.
pub const SPARSE_MAX_QUBITS: usize = 128;

/// Amplitudes below this squared magnitude are dropped.
const PRUNE: f64 = 1e-30;

/// A statevector storing only its non-zero amplitudes, with the same bit
/// convention as [`Statevector`]. Suited to circuits whose ancillas stay a
/// classical function of a small main register.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseState {
    num_qubits: usize,
    amps: BTreeMap<u128, Complex64>,
}

impl SparseState {
    pub fn zero_state(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits > SPARSE_MAX_QUBITS {
            return Err(SimError::TooLarge(num_qubits));
        }
        Ok(SparseState { num_qubits, amps: BTreeMap::from([(0, Complex64::new(1.0, 0.0))]) })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Number of stored amplitudes.
    pub fn support(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude_at(&self, index: u128) -> Complex64 {
        self.amps.get(&index).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    fn bit(&self, q: Qubit) -> u128 {
        1 << (self.num_qubits - 1 - q.0)
    }

    fn mask(&self, qs: &[Qubit]) -> u128 {
        qs.iter().fold(0, |m, q| m | self.bit(*q))
    }

    pub fn extract(&self, index: u128, qubits: &[Qubit]) -> u64 {
        qubits.iter().fold(0u64, |acc, q| (acc << 1) | u64::from(index & self.bit(*q) != 0))
    }

    pub fn success_probability(&self, measured: &[Qubit], predicate: impl Fn(u64) -> bool) -> f64 {
        self.amps.iter().filter(|(i, _)| predicate(self.extract(**i, measured))).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Non-zero outcome probabilities of measuring `measured`.
    pub fn marginal(&self, measured: &[Qubit]) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for (i, a) in &self.amps {
            *out.entry(self.extract(*i, measured)).or_insert(0.0) += a.norm_sqr();
        }
        out
    }

    pub fn to_dense(&self) -> Result<Statevector, SimError> {
        if self.num_qubits > super::MAX_QUBITS {
            return Err(SimError::TooLarge(self.num_qubits));
        }
        let mut amps = vec![Complex64::default(); 1 << self.num_qubits];
        for (i, a) in &self.amps {
            amps[*i as usize] = *a;
        }
        Statevector::from_amplitudes(amps)
    }

    fn permute(&mut self, f: impl Fn(u128) -> u128) {
        self.amps = std::mem::take(&mut self.amps).into_iter().map(|(i, a)| (f(i), a)).collect();
    }

    pub fn apply_gate(&mut self, gate: &Gate, oracles: &OracleBindings) -> Result<(), SimError> {
        if let Some(q) = gate.qubits().iter().find(|q| q.0 >= self.num_qubits) {
            return Err(SimError::RegisterMismatch(format!("{q} outside a {}-qubit state", self.num_qubits)));
        }
        match gate {
            Gate::X(q) => {
                let b = self.bit(*q);
                self.permute(|i| i ^ b);
            }
            Gate::Cx { control, target } => {
                let (c, t) = (self.bit(*control), self.bit(*target));
                self.permute(|i| if i & c == c { i ^ t } else { i });
            }
            Gate::Ccx { c1, c2, target } => {
                let (c, t) = (self.mask(&[*c1, *c2]), self.bit(*target));
                self.permute(|i| if i & c == c { i ^ t } else { i });
            }
            Gate::Z(q) => self.negate_where(self.bit(*q)),
            Gate::MultiControlledZ(qs) => self.negate_where(self.mask(qs)),
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
                let marked: Vec<u128> =
                    self.amps.keys().copied().filter(|i| spec.is_marked(self.extract(*i, qubits))).collect();
                for i in marked {
                    let a = self.amps.get_mut(&i).expect("key present");
                    *a = -*a;
                }
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
        circuit.gates().iter().try_for_each(|g| self.apply_gate(g, oracles))
    }

    fn negate_where(&mut self, mask: u128) {
        for (i, a) in self.amps.iter_mut() {
            if i & mask == mask {
                *a = -*a;
            }
        }
    }

    fn insert(out: &mut BTreeMap<u128, Complex64>, i: u128, a: Complex64) {
        if a.norm_sqr() > PRUNE {
            out.insert(i, a);
        }
    }

    fn apply_matrix(&mut self, q: Qubit, m: &Matrix2) {
        let b = self.bit(q);
        let bases: BTreeSet<u128> = self.amps.keys().map(|i| i & !b).collect();
        let mut out = BTreeMap::new();
        for base in bases {
            let (a0, a1) = (self.amplitude_at(base), self.amplitude_at(base | b));
            Self::insert(&mut out, base, m[0][0] * a0 + m[0][1] * a1);
            Self::insert(&mut out, base | b, m[1][0] * a0 + m[1][1] * a1);
        }
        self.amps = out;
    }

    fn diffuse(&mut self, qs: &[Qubit]) {
        let mask = self.mask(qs);
        let offsets: Vec<u128> = (0..1u128 << qs.len())
            .map(|v| qs.iter().enumerate().fold(0, |acc, (j, q)| acc | if v >> (qs.len() - 1 - j) & 1 == 1 { self.bit(*q) } else { 0 }))
            .collect();
        let scale = 2.0 / offsets.len() as f64;
        let bases: BTreeSet<u128> = self.amps.keys().map(|i| i & !mask).collect();
        let mut out = BTreeMap::new();
        for base in bases {
            let sum: Complex64 = offsets.iter().map(|o| self.amplitude_at(base | o)).sum();
            let twice_mean = sum * scale;
            for o in &offsets {
                Self::insert(&mut out, base | o, twice_mean - self.amplitude_at(base | o));
            }
        }
        self.amps = out;
    }
}
