//! Partial uncompute: rewriting a circuit that alternates oracle calls with
//! local unitaries so that only the part of the oracle's ancilla computation
//! that interferes with each local unitary is undone and redone.
//!
//! A [`GenericOracleCircuit`] is a sequence of factors, each an oracle call
//! followed (in time) by a unitary `U_j` supported on a qubit subset
//! `d(j)`. Given an oracle factored as `O = O_u† · O_p · O_u`, [`rewrite`]
//! emits, in time order,
//!
//! ```text
//! O_u, [O_p, O_s(j)†, U_j, O_s(j)] for each factor j, O_u†
//! ```
//!
//! where `O_s(j)` are the gates of `O_u` that depend on `d(j)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    acts_on, depends_on, depends_on_any, eval_classical, BasisState, Circuit, CircuitError, Gate, Qubit,
};
use crate::search::DiffuserSchedule;
use crate::sim::{unitary_equiv, EquivDomain, EquivOptions, OracleBindings, PhaseOracleSpec, SimError};

#[derive(Debug, Error)]
pub enum UncomputeError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("register mismatch: {0}")]
    Register(String),
    #[error("decomposition does not reproduce the oracle: {0}")]
    Invalid(String),
    #[error("factor {factor} acts on {qubit}, outside its declared support")]
    OutsideSupport { factor: usize, qubit: Qubit },
    #[error("a generic oracle circuit needs at least one factor")]
    NoFactors,
}

/// `O = O_u† · O_p · O_u` with both parts on the oracle's input register
/// followed by work ancillas.
#[derive(Clone, Debug, PartialEq)]
pub struct UncomputableDecomposition {
    uncompute: Circuit,
    phase: Circuit,
}

impl UncomputableDecomposition {
    pub fn new(uncompute: Circuit, phase: Circuit) -> Result<Self, UncomputeError> {
        if uncompute.num_main() != phase.num_main() || uncompute.num_ancilla() != phase.num_ancilla() {
            return Err(UncomputeError::Register(format!(
                "O_u on ({}, {}) but O_p on ({}, {})",
                uncompute.num_main(),
                uncompute.num_ancilla(),
                phase.num_main(),
                phase.num_ancilla()
            )));
        }
        Ok(UncomputableDecomposition { uncompute, phase })
    }

    /// `(Id, O)`: everything in the phase part.
    pub fn trivial(num_main: usize, oracle_tag: &str) -> Self {
        let mut phase = Circuit::new(num_main, 0);
        phase.push(Gate::oracle(oracle_tag, crate::circuit::qubit_range(0, num_main)));
        UncomputableDecomposition { uncompute: Circuit::new(num_main, 0), phase }
    }

    pub fn uncompute(&self) -> &Circuit {
        &self.uncompute
    }

    pub fn phase(&self) -> &Circuit {
        &self.phase
    }

    /// Gates in the uncomputable part.
    pub fn d_u(&self) -> usize {
        self.uncompute.len()
    }

    /// Gates in the phase part.
    pub fn d_p(&self) -> usize {
        self.phase.len()
    }

    pub fn num_main(&self) -> usize {
        self.uncompute.num_main()
    }

    pub fn num_ancilla(&self) -> usize {
        self.uncompute.num_ancilla()
    }

    /// `O_u`, `O_p`, `O_u†` in time order.
    pub fn as_circuit(&self) -> Circuit {
        let mut c = self.uncompute.clone();
        c.append(&self.phase);
        c.append_inverse(&self.uncompute);
        c
    }

    /// Number of gates of `O_u` depending on each main qubit.
    pub fn dependency_profile(&self) -> Vec<usize> {
        (0..self.num_main()).map(|i| depends_on(&self.uncompute, Qubit(i)).len()).collect()
    }

    /// Checks that `O_u† O_p O_u` acts as `spec` on every main-register input
    /// with clean ancillas and returns the ancillas to |0⟩.
    ///
    /// Classical reversible decompositions are checked by evaluating each
    /// basis input directly, which works for any ancilla count; others are
    /// simulated (register ≤ simulator limit). `bindings` resolves oracle
    /// calls inside the phase part, if any.
    pub fn validate(&self, spec: &PhaseOracleSpec, bindings: &OracleBindings) -> Result<(), UncomputeError> {
        let n = self.num_main();
        if spec.num_qubits() != n {
            return Err(UncomputeError::Register(format!("oracle on {} qubits, decomposition on {n}", spec.num_qubits())));
        }
        let full = self.as_circuit();
        let classical = eval_classical(&full, &BasisState::zeros(full.num_qubits())).is_some();
        if classical {
            for x in 0..1u64 << n {
                let input = BasisState::from_prefix(full.num_qubits(), n, x);
                let (out, negated) = eval_classical(&full, &input).expect("checked classical");
                if out != input {
                    return Err(UncomputeError::Invalid(format!("input {x:0n$b} not restored")));
                }
                if negated != spec.is_marked(x) {
                    return Err(UncomputeError::Invalid(format!("wrong phase on input {x:0n$b}")));
                }
            }
            return Ok(());
        }
        const TAG: &str = "decomposition-reference";
        let mut reference = Circuit::new(n, 0);
        reference.push(Gate::oracle(TAG, crate::circuit::qubit_range(0, n)));
        let bindings = bindings.clone().with(TAG, spec.clone());
        let opts = EquivOptions { domain: EquivDomain::ZeroAncilla, ..Default::default() };
        let report = unitary_equiv(&full, &reference, &bindings, opts)?;
        if !report.equivalent {
            return Err(UncomputeError::Invalid(format!("max deviation {:e}", report.max_deviation)));
        }
        Ok(())
    }

    /// Moves main qubit `i` to `perm[i]`; ancillas stay put.
    pub fn permute_main(&self, perm: &[Qubit]) -> UncomputableDecomposition {
        let n = self.num_main();
        assert_eq!(perm.len(), n);
        let map = |q: Qubit| if q.0 < n { perm[q.0] } else { q };
        UncomputableDecomposition {
            uncompute: self.uncompute.remap(n, self.num_ancilla(), map),
            phase: self.phase.remap(n, self.num_ancilla(), map),
        }
    }
}

/// One `(O, U_j)` pair of a generic oracle circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    /// The declared support `d(j)`.
    pub support: Vec<Qubit>,
    /// `U_j`, on the main register only.
    pub body: Circuit,
}

/// `V = ∏ (U_j ∘ O)`, stored in time order: factor 0 runs first.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericOracleCircuit {
    num_main: usize,
    oracle_tag: String,
    factors: Vec<Factor>,
}

impl GenericOracleCircuit {
    pub fn new(num_main: usize, oracle_tag: impl Into<String>, factors: Vec<Factor>) -> Result<Self, UncomputeError> {
        if factors.is_empty() {
            return Err(UncomputeError::NoFactors);
        }
        for (j, f) in factors.iter().enumerate() {
            if f.body.num_main() != num_main || f.body.num_ancilla() != 0 {
                return Err(UncomputeError::Register(format!("factor {j} body is not on the {num_main}-qubit main register")));
            }
            if let Some(q) = f.support.iter().find(|q| q.0 >= num_main) {
                return Err(CircuitError::QubitOutOfRange { qubit: q.0, size: num_main }.into());
            }
            let support: BTreeSet<Qubit> = f.support.iter().copied().collect();
            for g in f.body.gates() {
                if let Some(q) = acts_on(g).into_iter().find(|q| !support.contains(q)) {
                    return Err(UncomputeError::OutsideSupport { factor: j, qubit: q });
                }
            }
        }
        Ok(GenericOracleCircuit { num_main, oracle_tag: oracle_tag.into(), factors })
    }

    pub fn num_main(&self) -> usize {
        self.num_main
    }

    pub fn oracle_tag(&self) -> &str {
        &self.oracle_tag
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Number of factors (oracle queries).
    pub fn ell(&self) -> usize {
        self.factors.len()
    }

    /// The circuit with oracle calls left symbolic.
    pub fn expand(&self) -> Circuit {
        let mut c = Circuit::new(self.num_main, 0);
        let all = crate::circuit::qubit_range(0, self.num_main);
        for f in &self.factors {
            c.push(Gate::oracle(self.oracle_tag.clone(), all.clone()));
            c.append(&f.body);
        }
        c
    }

    /// The circuit with every oracle call replaced by `O_u, O_p, O_u†`.
    pub fn expand_with(&self, dec: &UncomputableDecomposition) -> Result<Circuit, UncomputeError> {
        self.check_register(dec)?;
        let oracle = dec.as_circuit();
        let mut c = Circuit::new(self.num_main, dec.num_ancilla());
        for f in &self.factors {
            c.append(&oracle);
            c.append(&f.body);
        }
        Ok(c)
    }

    fn check_register(&self, dec: &UncomputableDecomposition) -> Result<(), UncomputeError> {
        if dec.num_main() != self.num_main {
            return Err(UncomputeError::Register(format!(
                "decomposition on {} main qubits, circuit on {}",
                dec.num_main(),
                self.num_main
            )));
        }
        Ok(())
    }
}

/// Splits `O_u` into the gates depending on any qubit of `s` (first) and
/// the rest (second), each in original order. `O_u` equals the rest
/// followed by the dependent part.
pub fn split_by_dependency(uncompute: &Circuit, s: &[Qubit]) -> (Circuit, Circuit) {
    let dep = depends_on_any(uncompute, s);
    let mut dependent = Circuit::new(uncompute.num_main(), uncompute.num_ancilla());
    let mut rest = dependent.clone();
    for (i, g) in uncompute.gates().iter().enumerate() {
        if dep.contains(&i) {
            dependent.push(g.clone());
        } else {
            rest.push(g.clone());
        }
    }
    (dependent, rest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewriteReport {
    pub ell: usize,
    pub d_u: usize,
    pub d_p: usize,
    /// `|d(j)|` per factor.
    pub support_sizes: Vec<usize>,
    /// Gates of `O_u` depending on any qubit of `d(j)`, per factor.
    pub dependent_gates: Vec<usize>,
    /// Gates of `O_u` depending on each main qubit.
    pub per_qubit_dependency: Vec<usize>,
    /// Weighted per-qubit sum `Σ_{i ∈ d(j)} D_i`, per factor.
    pub support_dependency_sums: Vec<usize>,
    /// `2 D_u + ℓ D_p + 2 Σ_j D̄_{d(j)}`.
    pub total_oracle_gates: usize,
    /// Oracle-derived gates actually emitted (everything except the bodies).
    pub emitted_oracle_gates: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageMode {
    /// Uses the exact dependent-gate count of each support.
    Exact,
    /// Bounds each support's count by the sum of its qubits' counts.
    Weighted,
    /// Replaces each qubit's count by the average over all main qubits.
    Uniform,
}

/// Oracle-derived gates per oracle query under the chosen accounting.
pub fn average_per_query(report: &RewriteReport, mode: AverageMode) -> f64 {
    let ell = report.ell as f64;
    let d_u = report.d_u as f64;
    let d_p = report.d_p as f64;
    match mode {
        AverageMode::Exact => d_p + 2.0 * d_u / ell + 2.0 * report.dependent_gates.iter().sum::<usize>() as f64 / ell,
        AverageMode::Weighted => d_p + 2.0 * (d_u + report.support_dependency_sums.iter().sum::<usize>() as f64) / ell,
        AverageMode::Uniform => {
            let n = report.per_qubit_dependency.len().max(1) as f64;
            let mean = report.per_qubit_dependency.iter().sum::<usize>() as f64 / n;
            d_p + 2.0 * d_u / ell + 2.0 * mean * report.support_sizes.iter().sum::<usize>() as f64 / ell
        }
    }
}

/// Emits the rewritten circuit `Ṽ` on the main register plus the
/// decomposition's ancillas, and its gate accounting.
pub fn rewrite(
    v: &GenericOracleCircuit,
    dec: &UncomputableDecomposition,
) -> Result<(Circuit, RewriteReport), UncomputeError> {
    v.check_register(dec)?;
    let mut out = Circuit::new(v.num_main(), dec.num_ancilla());
    out.append(dec.uncompute());
    let mut emitted = dec.d_u();
    let mut dependent_gates = Vec::with_capacity(v.ell());
    for f in v.factors() {
        let (dependent, _) = split_by_dependency(dec.uncompute(), &f.support);
        out.append(dec.phase());
        out.append_inverse(&dependent);
        out.append(&f.body);
        out.append(&dependent);
        emitted += dec.d_p() + 2 * dependent.len();
        dependent_gates.push(dependent.len());
    }
    out.append_inverse(dec.uncompute());
    emitted += dec.d_u();

    let per_qubit = dec.dependency_profile();
    let report = RewriteReport {
        ell: v.ell(),
        d_u: dec.d_u(),
        d_p: dec.d_p(),
        support_sizes: v.factors().iter().map(|f| f.support.len()).collect(),
        support_dependency_sums: v
            .factors()
            .iter()
            .map(|f| f.support.iter().map(|q| per_qubit[q.0]).sum())
            .collect(),
        total_oracle_gates: 2 * dec.d_u() + v.ell() * dec.d_p() + 2 * dependent_gates.iter().sum::<usize>(),
        dependent_gates,
        per_qubit_dependency: per_qubit,
        emitted_oracle_gates: emitted,
    };
    debug_assert_eq!(report.total_oracle_gates, report.emitted_oracle_gates);
    Ok((out, report))
}

/// Piece of a circuit during the stepwise derivation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Segment {
    Uncompute,
    UncomputeInv,
    Phase,
    Body(usize),
    /// Gates of `O_u` depending on factor j's support, and its inverse.
    Dependent(usize),
    DependentInv(usize),
    /// The remaining gates of `O_u` for factor j, and its inverse.
    Rest(usize),
    RestInv(usize),
}

/// Circuits after each stage of the derivation of `Ṽ` from `V`: the
/// expanded `V`, then the results of
///
/// 1. appending `O_u†·O_u` after every body,
/// 2. splitting each `O_u` around a body into its dependent and remaining
///    parts,
/// 3. commuting the remaining part's inverse past the body,
/// 4. cancelling the remaining part against its inverse,
/// 5. cancelling `O_u†·O_u` between consecutive factors.
///
/// The last entry is gate-for-gate the output of [`rewrite`].
pub fn rewrite_stepwise(
    v: &GenericOracleCircuit,
    dec: &UncomputableDecomposition,
) -> Result<Vec<Circuit>, UncomputeError> {
    use Segment::*;
    v.check_register(dec)?;
    let ell = v.ell();
    let splits: Vec<(Circuit, Circuit)> =
        v.factors().iter().map(|f| split_by_dependency(dec.uncompute(), &f.support)).collect();

    let mut segs: Vec<Segment> = (0..ell).flat_map(|j| [Uncompute, Phase, UncomputeInv, Body(j)]).collect();
    let mut stages = Vec::new();
    let render = |segs: &[Segment]| {
        let mut c = Circuit::new(v.num_main(), dec.num_ancilla());
        for s in segs {
            match *s {
                Uncompute => c.append(dec.uncompute()),
                UncomputeInv => c.append_inverse(dec.uncompute()),
                Phase => c.append(dec.phase()),
                Body(j) => c.append(&v.factors()[j].body),
                Dependent(j) => c.append(&splits[j].0),
                DependentInv(j) => c.append_inverse(&splits[j].0),
                Rest(j) => c.append(&splits[j].1),
                RestInv(j) => c.append_inverse(&splits[j].1),
            }
        }
        c
    };
    stages.push(render(&segs));

    // 1
    segs = segs.into_iter().flat_map(|s| match s {
        Body(j) => vec![Body(j), Uncompute, UncomputeInv],
        s => vec![s],
    }).collect();
    stages.push(render(&segs));

    // 2: the O_u† right before Body(j) and the O_u right after it
    let mut next = Vec::with_capacity(segs.len() + 2 * ell);
    for (i, s) in segs.iter().enumerate() {
        match (*s, segs.get(i + 1), i.checked_sub(1).map(|p| segs[p])) {
            (UncomputeInv, Some(Body(j)), _) => next.extend([DependentInv(*j), RestInv(*j)]),
            (Uncompute, _, Some(Body(j))) => next.extend([Rest(j), Dependent(j)]),
            (s, _, _) => next.push(s),
        }
    }
    segs = next;
    stages.push(render(&segs));

    // 3
    for i in 0..segs.len() - 1 {
        if let (RestInv(j), Body(k)) = (segs[i], segs[i + 1]) {
            assert_eq!(j, k);
            segs.swap(i, i + 1);
        }
    }
    stages.push(render(&segs));

    // 4
    let mut next = Vec::with_capacity(segs.len());
    let mut i = 0;
    while i < segs.len() {
        if let (RestInv(j), Some(Rest(k))) = (segs[i], segs.get(i + 1)) {
            assert_eq!(j, *k);
            i += 2;
            continue;
        }
        next.push(segs[i]);
        i += 1;
    }
    segs = next;
    stages.push(render(&segs));

    // 5
    let mut next = Vec::with_capacity(segs.len());
    let mut i = 0;
    while i < segs.len() {
        if segs[i] == UncomputeInv && segs.get(i + 1) == Some(&Uncompute) {
            i += 2;
            continue;
        }
        next.push(segs[i]);
        i += 1;
    }
    segs = next;
    stages.push(render(&segs));
    Ok(stages)
}

/// Block of qubits holding diffuser `j` (0-based) of a schedule.
pub fn schedule_block(schedule: &DiffuserSchedule, j: usize) -> Vec<Qubit> {
    let start: usize = schedule.ks()[..j].iter().sum();
    crate::circuit::qubit_range(start, start + schedule.ks()[j])
}

/// The nested search circuit as a generic oracle circuit: one factor per
/// oracle call, each body a single diffuser on its schedule block.
pub fn w_as_generic(schedule: &DiffuserSchedule, oracle_tag: &str) -> GenericOracleCircuit {
    // Block indices in product order: d_j = d_{j-1}, j, reverse(d_{j-1}), d_{j-1}.
    let mut product_order: Vec<usize> = Vec::new();
    for j in 0..schedule.m() {
        let prev = product_order.clone();
        product_order.push(j);
        product_order.extend(prev.iter().rev());
        product_order.extend(prev.iter());
    }
    // The product composes right to left, so its last index acts first.
    let n = schedule.n();
    let factors = product_order
        .into_iter()
        .rev()
        .map(|b| {
            let support = schedule_block(schedule, b);
            let mut body = Circuit::new(n, 0);
            body.push(Gate::Diffuser(support.clone()));
            Factor { support, body }
        })
        .collect();
    GenericOracleCircuit::new(n, oracle_tag, factors).expect("diffusers act within their own block")
}

/// Permutation of main qubits (`perm[i]` = new position of qubit `i`)
/// that sends the qubits with the fewest dependent gates to the positions
/// covered by the most factors. Ties keep the original order.
pub fn dependency_relabeling(per_qubit_dependency: &[usize], v: &GenericOracleCircuit) -> Vec<Qubit> {
    let n = per_qubit_dependency.len();
    let mut coverage = vec![0usize; n];
    for f in v.factors() {
        for q in &f.support {
            coverage[q.0] += 1;
        }
    }
    let mut by_dependency: Vec<usize> = (0..n).collect();
    by_dependency.sort_by_key(|&i| (per_qubit_dependency[i], i));
    let mut by_coverage: Vec<usize> = (0..n).collect();
    by_coverage.sort_by_key(|&i| (std::cmp::Reverse(coverage[i]), i));
    let mut perm = vec![Qubit(0); n];
    for (q, pos) in by_dependency.into_iter().zip(by_coverage) {
        perm[q] = Qubit(pos);
    }
    perm
}

/// Names the gate ranges of an oracle circuit file that form `O_u` and
/// `O_p` (half-open `[start, end)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionManifest {
    pub uncompute: [usize; 2],
    pub phase: [usize; 2],
}

impl DecompositionManifest {
    pub fn extract(&self, circuit: &Circuit) -> Result<UncomputableDecomposition, UncomputeError> {
        let len = circuit.len();
        for [s, e] in [self.uncompute, self.phase] {
            if s > e || e > len {
                return Err(UncomputeError::Register(format!("gate range [{s}, {e}) outside a {len}-gate circuit")));
            }
        }
        UncomputableDecomposition::new(
            circuit.slice(self.uncompute[0], self.uncompute[1]),
            circuit.slice(self.phase[0], self.phase[1]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::qubit_range;
    use crate::search::build_w;
    use crate::sim::{unitary_equiv, EquivOptions};
    use proptest::prelude::*;

    fn q(i: usize) -> Qubit {
        Qubit(i)
    }

    /// Oracle marking x where q0 ∧ q1 via an ancilla: O_u = CCX, O_p = Z.
    fn and_decomposition(n: usize) -> UncomputableDecomposition {
        let mut u = Circuit::new(n, 1);
        u.push(Gate::ccx(q(0), q(1), q(n)));
        let mut p = Circuit::new(n, 1);
        p.push(Gate::Z(q(n)));
        UncomputableDecomposition::new(u, p).unwrap()
    }

    #[test]
    fn split_examples() {
        let mut u = Circuit::new(4, 0);
        u.push(Gate::cx(q(0), q(2)));
        u.push(Gate::cx(q(1), q(3)));
        let (dep, rest) = split_by_dependency(&u, &[]);
        assert!(dep.is_empty());
        assert_eq!(rest, u);
        let (dep, rest) = split_by_dependency(&u, &qubit_range(0, 4));
        assert_eq!(dep, u);
        assert!(rest.is_empty());
        let (dep, rest) = split_by_dependency(&u, &[q(0)]);
        assert_eq!(dep.gates(), &[Gate::cx(q(0), q(2))]);
        assert_eq!(rest.gates(), &[Gate::cx(q(1), q(3))]);
        let mut recombined = rest.clone();
        recombined.append(&dep);
        let r = unitary_equiv(&u, &recombined, &OracleBindings::new(), EquivOptions::default()).unwrap();
        assert!(r.equivalent);
    }

    #[test]
    fn validate_accepts_and_rejects() {
        let spec = PhaseOracleSpec::from_predicate(3, |x| x >> 1 == 0b11);
        and_decomposition(3).validate(&spec, &OracleBindings::new()).unwrap();
        let wrong = PhaseOracleSpec::single(3, 0);
        assert!(and_decomposition(3).validate(&wrong, &OracleBindings::new()).is_err());

        let trivial = UncomputableDecomposition::trivial(3, "O");
        let b = OracleBindings::new().with("O", wrong.clone());
        trivial.validate(&wrong, &b).unwrap();
    }

    #[test]
    fn factor_outside_support_is_rejected() {
        let mut body = Circuit::new(2, 0);
        body.push(Gate::H(q(1)));
        let err = GenericOracleCircuit::new(2, "O", vec![Factor { support: vec![q(0)], body }]).unwrap_err();
        assert!(matches!(err, UncomputeError::OutsideSupport { factor: 0, qubit: Qubit(1) }));
    }

    #[test]
    fn trivial_decomposition_costs_d_p_per_query() {
        let s = DiffuserSchedule::new(vec![2, 1]).unwrap();
        let v = w_as_generic(&s, "O");
        let dec = UncomputableDecomposition::trivial(3, "O");
        let (out, r) = rewrite(&v, &dec).unwrap();
        assert_eq!(r.total_oracle_gates, v.ell());
        assert_eq!(out, v.expand());
        for mode in [AverageMode::Exact, AverageMode::Weighted, AverageMode::Uniform] {
            assert_eq!(average_per_query(&r, mode), 1.0);
        }
    }

    #[test]
    fn full_supports_save_nothing() {
        let dec = and_decomposition(3);
        let factors = (0..3)
            .map(|_| {
                let mut body = Circuit::new(3, 0);
                body.push(Gate::Diffuser(qubit_range(0, 3)));
                Factor { support: qubit_range(0, 3), body }
            })
            .collect();
        let v = GenericOracleCircuit::new(3, "O", factors).unwrap();
        let (_, r) = rewrite(&v, &dec).unwrap();
        assert_eq!(r.total_oracle_gates, 2 * dec.d_u() + 3 * dec.d_p() + 2 * 3 * dec.d_u());
    }

    #[test]
    fn w_generic_matches_build_w() {
        for ks in [vec![3], vec![4, 3], vec![1, 2, 1], vec![2, 1, 1, 1]] {
            let s = DiffuserSchedule::new(ks).unwrap();
            let v = w_as_generic(&s, "O");
            assert_eq!(v.ell(), (3usize.pow(s.m() as u32) - 1) / 2);
            assert_eq!(v.expand(), build_w(&s, "O"));
        }
    }

    #[test]
    fn w_generic_block_sequence_for_fig_schedule() {
        let s = DiffuserSchedule::new(vec![4, 3]).unwrap();
        let blocks: Vec<usize> =
            w_as_generic(&s, "O").factors().iter().map(|f| if f.support[0] == q(0) { 1 } else { 2 }).collect();
        assert_eq!(blocks, vec![1, 1, 2, 1]);
    }

    #[test]
    fn w_generic_support_total() {
        let s = DiffuserSchedule::new(vec![2, 3, 1]).unwrap();
        let v = w_as_generic(&s, "O");
        assert_eq!(v.ell(), 13);
        let total: usize = v.factors().iter().map(|f| f.support.len()).sum();
        assert_eq!(total, 2 * 9 + 3 * 3 + 1);
    }

    #[test]
    fn stepwise_stages_agree_with_rewrite() {
        let s = DiffuserSchedule::new(vec![1, 2]).unwrap();
        let v = w_as_generic(&s, "O");
        let dec = and_decomposition(3);
        let stages = rewrite_stepwise(&v, &dec).unwrap();
        assert_eq!(stages.len(), 6);
        assert_eq!(stages[0], v.expand_with(&dec).unwrap());
        let (direct, _) = rewrite(&v, &dec).unwrap();
        assert_eq!(stages[5], direct);
        for st in &stages[1..] {
            let r = unitary_equiv(&stages[0], st, &OracleBindings::new(), EquivOptions::default()).unwrap();
            assert!(r.equivalent, "{r:?}");
        }
    }

    fn arb_uncompute(n: usize, anc: usize) -> impl Strategy<Value = Circuit> {
        let total = n + anc;
        proptest::collection::vec((0usize..3, 0..total, 0..total, 0..total), 0..25).prop_map(move |gs| {
            let mut c = Circuit::new(n, anc);
            for (kind, a, b, t) in gs {
                let b = if b == a { (a + 1) % total } else { b };
                let t = if t == a || t == b { (0..total).find(|&i| i != a && i != b).unwrap() } else { t };
                c.push(match kind {
                    0 => Gate::X(Qubit(a)),
                    1 => Gate::cx(Qubit(a), Qubit(t)),
                    _ => Gate::ccx(Qubit(a), Qubit(b), Qubit(t)),
                });
            }
            c
        })
    }

    proptest! {
        #[test]
        fn split_commutes(u in arb_uncompute(4, 2), mask in 0u32..16) {
            let s: Vec<Qubit> = (0..4).filter(|i| mask >> i & 1 == 1).map(Qubit).collect();
            let (dep, rest) = split_by_dependency(&u, &s);
            let mut recombined = rest;
            recombined.append(&dep);
            let r = unitary_equiv(&u, &recombined, &OracleBindings::new(), EquivOptions::default()).unwrap();
            prop_assert!(r.equivalent);
        }

        #[test]
        fn larger_support_never_has_fewer_dependents(u in arb_uncompute(5, 2), a in 0u32..32, b in 0u32..32) {
            let s1: Vec<Qubit> = (0..5).filter(|i| a >> i & 1 == 1).map(Qubit).collect();
            let s2: Vec<Qubit> = (0..5).filter(|i| (a | b) >> i & 1 == 1).map(Qubit).collect();
            prop_assert!(depends_on_any(&u, &s1).len() <= depends_on_any(&u, &s2).len());
        }

        #[test]
        fn rewrite_is_sound_and_exact(u in arb_uncompute(4, 2), ks in proptest::sample::select(vec![vec![2, 2], vec![1, 3], vec![1, 1, 2]])) {
            let mut p = Circuit::new(4, 2);
            p.push(Gate::Z(Qubit(5)));
            let dec = UncomputableDecomposition::new(u, p).unwrap();
            let v = w_as_generic(&DiffuserSchedule::new(ks).unwrap(), "O");
            let (out, r) = rewrite(&v, &dec).unwrap();
            let bodies: usize = v.factors().iter().map(|f| f.body.len()).sum();
            prop_assert_eq!(out.len() - bodies, r.total_oracle_gates);
            let expanded = v.expand_with(&dec).unwrap();
            let eq = unitary_equiv(&expanded, &out, &OracleBindings::new(), EquivOptions::default()).unwrap();
            prop_assert!(eq.equivalent, "{:?}", eq);
        }

        #[test]
        fn averages_are_ordered_after_relabeling(u in arb_uncompute(5, 3), ks in proptest::sample::select(vec![vec![2, 3], vec![1, 2, 2], vec![5]])) {
            let mut p = Circuit::new(5, 3);
            p.push(Gate::Z(Qubit(7)));
            let dec = UncomputableDecomposition::new(u, p).unwrap();
            let v = w_as_generic(&DiffuserSchedule::new(ks).unwrap(), "O");
            let perm = dependency_relabeling(&dec.dependency_profile(), &v);
            let dec = dec.permute_main(&perm);
            let (_, r) = rewrite(&v, &dec).unwrap();
            let exact = average_per_query(&r, AverageMode::Exact);
            let weighted = average_per_query(&r, AverageMode::Weighted);
            let uniform = average_per_query(&r, AverageMode::Uniform);
            prop_assert!(exact <= weighted + 1e-9);
            prop_assert!(weighted <= uniform + 1e-9, "{} > {}", weighted, uniform);
        }
    }
}
