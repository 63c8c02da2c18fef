use super::{Circuit, Gate, Qubit};

/// A computational basis state of an arbitrary-width register, one bool per
/// qubit. Used where registers are too wide for a statevector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisState(pub Vec<bool>);

impl BasisState {
    pub fn zeros(num_qubits: usize) -> Self {
        BasisState(vec![false; num_qubits])
    }

    /// State whose first `width` qubits spell `value` (qubit 0 most
    /// significant); remaining qubits are 0.
    pub fn from_prefix(num_qubits: usize, width: usize, value: u64) -> Self {
        let mut bits = vec![false; num_qubits];
        for (i, b) in bits.iter_mut().take(width).enumerate() {
            *b = (value >> (width - 1 - i)) & 1 == 1;
        }
        BasisState(bits)
    }

    pub fn get(&self, q: Qubit) -> bool {
        self.0[q.0]
    }

    /// Value of the first `width` qubits, qubit 0 most significant.
    pub fn prefix_value(&self, width: usize) -> u64 {
        self.0[..width].iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }
}

/// Runs a classical reversible circuit (X, CX, CCX, Z, MCZ) on a basis
/// state. Returns the output state and whether the accumulated phase is −1,
/// or `None` if the circuit contains a gate that creates superpositions.
pub fn eval_classical(circuit: &Circuit, input: &BasisState) -> Option<(BasisState, bool)> {
    let mut s = input.clone();
    let mut negated = false;
    for gate in circuit.gates() {
        match gate {
            Gate::X(q) => s.0[q.0] ^= true,
            Gate::Cx { control, target } => {
                if s.get(*control) {
                    s.0[target.0] ^= true;
                }
            }
            Gate::Ccx { c1, c2, target } => {
                if s.get(*c1) && s.get(*c2) {
                    s.0[target.0] ^= true;
                }
            }
            Gate::Z(q) => negated ^= s.get(*q),
            Gate::MultiControlledZ(qs) => negated ^= qs.iter().all(|q| s.get(*q)),
            _ => return None,
        }
    }
    Some((s, negated))
}
