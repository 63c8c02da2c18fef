use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{basic_size, Circuit, Gate, Matrix2, Qubit, MATRIX_TOL};

/// Qubits on which the gate's unitary is non-trivial.
///
/// A one-qubit gate equal to the identity up to global phase acts on
/// nothing. Every other kind acts on all the qubits it lists; an oracle call
/// acts on its whole input register.
pub fn acts_on(gate: &Gate) -> BTreeSet<Qubit> {
    if let Some(m) = gate.one_qubit_matrix() {
        if is_scalar(&m) {
            return BTreeSet::new();
        }
    }
    gate.qubits().into_iter().collect()
}

fn is_scalar(m: &Matrix2) -> bool {
    m[0][1].norm() < MATRIX_TOL && m[1][0].norm() < MATRIX_TOL && (m[0][0] - m[1][1]).norm() < MATRIX_TOL
}

/// Indices of the gates that depend on `q`.
pub fn depends_on(circuit: &Circuit, q: Qubit) -> BTreeSet<usize> {
    depends_on_any(circuit, &[q])
}

/// Indices of the gates that depend on any qubit of `set`.
///
/// A gate depends on a qubit if it acts on it, or if it acts on a qubit that
/// some earlier dependent gate acted on. One forward sweep over the gate
/// list, tracking the set of qubits touched by dependent gates, computes the
/// least fixed point.
pub fn depends_on_any(circuit: &Circuit, set: &[Qubit]) -> BTreeSet<usize> {
    let mut tainted = vec![false; circuit.num_qubits()];
    for q in set {
        tainted[q.0] = true;
    }
    let mut out = BTreeSet::new();
    for (idx, gate) in circuit.gates().iter().enumerate() {
        let acted = acts_on(gate);
        if acted.iter().any(|q| tainted[q.0]) {
            out.insert(idx);
            for q in acted {
                tainted[q.0] = true;
            }
        }
    }
    out
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountLevel {
    /// X, CX, CCX, diffusers and every other listed gate count 1.
    Logical,
    /// Every gate counts as the size of its basic decomposition.
    Basic,
}

/// Gate statistics of a circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCountReport {
    pub level: CountLevel,
    /// Count per gate kind. At the basic level the kinds are `U` (any
    /// one-qubit gate), `CX` and `ORACLE`.
    pub per_kind: BTreeMap<String, usize>,
    /// Sum of `per_kind`.
    pub total: usize,
    pub oracle_calls: usize,
    /// Non-oracle gates after lowering to the basic tier.
    pub basic_equivalent: usize,
    /// `dependency[i]` is the number of gates that depend on qubit `i`.
    pub dependency: Vec<usize>,
}

impl GateCountReport {
    /// Gates that are not oracle calls.
    pub fn non_oracle(&self) -> usize {
        self.total - self.oracle_calls
    }
}

pub fn count_gates(circuit: &Circuit, level: CountLevel) -> GateCountReport {
    let mut per_kind: BTreeMap<String, usize> = BTreeMap::new();
    let mut oracle_calls = 0;
    let mut basic_equivalent = 0;
    for gate in circuit.gates() {
        let size = basic_size(gate);
        basic_equivalent += size;
        if gate.is_oracle() {
            oracle_calls += 1;
            *per_kind.entry("ORACLE".into()).or_default() += 1;
            continue;
        }
        match level {
            CountLevel::Logical => *per_kind.entry(gate.kind().into()).or_default() += 1,
            CountLevel::Basic => {
                let (one, cx) = basic_split(gate);
                if one > 0 {
                    *per_kind.entry("U".into()).or_default() += one;
                }
                if cx > 0 {
                    *per_kind.entry("CX".into()).or_default() += cx;
                }
                debug_assert_eq!(one + cx, size);
            }
        }
    }
    let total = per_kind.values().sum();
    let dependency = (0..circuit.num_qubits()).map(|i| depends_on(circuit, Qubit(i)).len()).collect();
    GateCountReport { level, per_kind, total, oracle_calls, basic_equivalent, dependency }
}

/// (one-qubit, CX) split of a gate's basic decomposition.
fn basic_split(gate: &Gate) -> (usize, usize) {
    let total = basic_size(gate);
    let cx = match gate {
        Gate::Cx { .. } => 1,
        Gate::Ccx { .. } => 6,
        Gate::MultiControlledZ(qs) => super::decompose::mcz_cx_count(qs.len()),
        Gate::Diffuser(qs) if qs.len() > 1 => super::decompose::mcz_cx_count(qs.len()),
        _ => 0,
    };
    (total - cx, cx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::qubit_range;
    use num_complex::Complex64;

    fn q(i: usize) -> Qubit {
        Qubit(i)
    }

    fn identity() -> Matrix2 {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        [[l, o], [o, l]]
    }

    #[test]
    fn acts_on_definition() {
        assert_eq!(acts_on(&Gate::cx(q(0), q(1))), [q(0), q(1)].into_iter().collect());
        assert!(acts_on(&Gate::one_qubit(q(3), identity(), "I")).is_empty());
        let mut phased = identity();
        phased[0][0] *= Complex64::new(0.0, 1.0);
        phased[1][1] *= Complex64::new(0.0, 1.0);
        assert!(acts_on(&Gate::one_qubit(q(3), phased, "iI")).is_empty());
        assert_eq!(acts_on(&Gate::X(q(3))), [q(3)].into_iter().collect());
        assert_eq!(acts_on(&Gate::Diffuser(vec![q(4), q(5), q(6)])).len(), 3);
        assert!(acts_on(&Gate::ry(q(0), 0.0)).is_empty());
        assert!(acts_on(&Gate::ry(q(0), 2.0 * std::f64::consts::PI)).is_empty());
        assert_eq!(acts_on(&Gate::oracle("O", qubit_range(0, 4))).len(), 4);
    }

    #[test]
    fn dependency_base_and_inductive_clauses() {
        let mut c = Circuit::new(3, 0);
        c.push(Gate::cx(q(0), q(1)));
        assert_eq!(depends_on(&c, q(0)), [0].into_iter().collect());
        c.push(Gate::cx(q(1), q(2)));
        assert_eq!(depends_on(&c, q(0)), [0, 1].into_iter().collect());
        // q2 was untouched before gate 1, so gate 0 does not depend on it.
        assert_eq!(depends_on(&c, q(2)), [1].into_iter().collect());
    }

    #[test]
    fn dependency_is_chronological() {
        let mut c = Circuit::new(3, 0);
        c.push(Gate::cx(q(1), q(2)));
        c.push(Gate::cx(q(0), q(1)));
        assert_eq!(depends_on(&c, q(0)), [1].into_iter().collect());
    }

    #[test]
    fn empty_circuit_counts_zero() {
        let r = count_gates(&Circuit::new(2, 0), CountLevel::Logical);
        assert_eq!(r.total, 0);
        assert_eq!(r.oracle_calls, 0);
        assert_eq!(r.basic_equivalent, 0);
        assert_eq!(r.dependency, vec![0, 0]);
    }

    #[test]
    fn totals_match_per_kind() {
        let mut c = Circuit::new(3, 1);
        c.push(Gate::ccx(q(0), q(1), q(3)));
        c.push(Gate::Diffuser(qubit_range(0, 3)));
        c.push(Gate::oracle("O", qubit_range(0, 3)));
        c.push(Gate::X(q(2)));
        for level in [CountLevel::Logical, CountLevel::Basic] {
            let r = count_gates(&c, level);
            assert_eq!(r.total, r.per_kind.values().sum::<usize>());
            assert_eq!(r.oracle_calls, 1);
        }
        let logical = count_gates(&c, CountLevel::Logical);
        assert_eq!(logical.total, 4);
        let basic = count_gates(&c, CountLevel::Basic);
        assert_eq!(basic.total - basic.oracle_calls, basic.basic_equivalent);
    }
}
