//! Search with several marked elements: hash the domain with a random
//! affine map, search its kernel with the single-element algorithm through
//! a restricted oracle, and repeat over a descending range of hash widths
//! when the number of marked elements is unknown.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{qubit_range, Circuit, Gate, Qubit};
use crate::gf2::{parametrize_kernel, sample_hash, trial_rng, AffineMap, Gf2Error, KernelParam};
use crate::search::{build_single_point, Family, SearchError, SinglePointOptions};
use crate::sim::{PhaseOracleSpec, Statevector};
use crate::uncompute::{UncomputableDecomposition, UncomputeError};

#[derive(Debug, Error)]
pub enum MultipointError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Uncompute(#[from] UncomputeError),
    #[error("success probability target {0} must lie in (0, 1)")]
    BadProbability(f64),
    #[error("kernel parametrization has {found} coordinates, oracle has {expected} qubits")]
    Width { expected: usize, found: usize },
}

/// `D_g|i⟩|0…0⟩ = |i⟩|g(i)⟩` on `d` main qubits and `n` ancillas: an X for
/// every one of `p`, then a CX for every one of `C`. The X gates go first
/// so that no gate outside the CXs depends on a parameter qubit. Coordinates are laid
/// out so that each register's basis index equals the packed vector.
pub fn build_dg(g: &KernelParam) -> Circuit {
    let (d, n) = (g.d, g.n());
    let mut c = Circuit::new(d, n);
    for s in 0..n {
        if g.p >> (n - 1 - s) & 1 == 1 {
            c.push(Gate::X(Qubit(d + s)));
        }
    }
    for t in 0..d {
        let coord_in = d - 1 - t;
        for s in 0..n {
            let coord_out = n - 1 - s;
            if g.c.get(coord_out, coord_in) {
                c.push(Gate::cx(Qubit(t), Qubit(d + s)));
            }
        }
    }
    c
}

/// `O_g = D_g† (I ⊗ O) D_g`, searched over the `d` parameter qubits.
#[derive(Clone, Debug)]
pub struct RestrictedOracle {
    pub base: PhaseOracleSpec,
    pub g: KernelParam,
}

impl RestrictedOracle {
    pub fn new(base: PhaseOracleSpec, g: KernelParam) -> Result<Self, MultipointError> {
        if g.n() != base.num_qubits() {
            return Err(MultipointError::Width { expected: base.num_qubits(), found: g.n() });
        }
        Ok(RestrictedOracle { base, g })
    }

    pub fn d(&self) -> usize {
        self.g.d
    }

    pub fn total_qubits(&self) -> usize {
        self.g.d + self.g.n()
    }

    pub fn loader(&self) -> Circuit {
        build_dg(&self.g)
    }

    /// Basic gates in `D_g`.
    pub fn loader_gates(&self) -> usize {
        self.g.c.ones() + self.g.p.count_ones() as usize
    }

    /// The circuit form, with the base oracle called as `tag` on the second
    /// register.
    pub fn circuit(&self, tag: &str) -> Circuit {
        let dg = self.loader();
        let mut c = dg.clone();
        c.push(Gate::oracle(tag, qubit_range(self.g.d, self.total_qubits())));
        c.append_inverse(&dg);
        c
    }

    /// The predicate view `i ↦ f(g(i))`, carrying the lifted decomposition
    /// `((I ⊗ O_u) D_g, I ⊗ O_p)` when the base oracle has one.
    pub fn spec(&self) -> Result<PhaseOracleSpec, MultipointError> {
        let base = self.base.clone();
        let g = self.g.clone();
        let spec = PhaseOracleSpec::from_predicate(self.g.d, move |i| base.is_marked(g.eval(i)));
        match self.base.decomposition() {
            None => Ok(spec),
            Some(dec) => Ok(spec.with_decomposition(self.lift(dec)?)),
        }
    }

    pub fn lift(&self, dec: &UncomputableDecomposition) -> Result<UncomputableDecomposition, MultipointError> {
        let d = self.g.d;
        let ancillas = self.g.n() + dec.num_ancilla();
        let shift = |c: &Circuit| c.remap(d, ancillas, |q| Qubit(q.0 + d));
        let mut uncompute = self.loader().with_ancillas(ancillas);
        uncompute.append(&shift(dec.uncompute()));
        Ok(UncomputableDecomposition::new(uncompute, shift(dec.phase()))?)
    }
}

pub fn restrict_oracle(oracle: &PhaseOracleSpec, g: &KernelParam) -> Result<RestrictedOracle, MultipointError> {
    RestrictedOracle::new(oracle.clone(), g.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct SearchTelemetry {
    pub oracle_queries: u64,
    pub non_oracle_basic_gates: u64,
    pub trials: u64,
    pub seed: u64,
}

impl SearchTelemetry {
    fn add(&mut self, t: &TrialRecord) {
        self.oracle_queries += t.oracle_queries;
        self.non_oracle_basic_gates += t.non_oracle_basic_gates;
        self.trials += 1;
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    /// `k ≥ n − 2`: one uniformly random guess.
    ClassicalPick,
    EmptyKernel,
    KernelTooLarge,
    /// `d = 0`: the kernel is a single point, tested directly.
    SinglePoint,
    Quantum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub k: usize,
    pub kind: TrialKind,
    pub d: Option<usize>,
    /// Marked elements inside the kernel, where a kernel was searched.
    pub marked_in_kernel: Option<u64>,
    /// Probability that this trial returns a marked element, given its hash.
    pub success_probability: f64,
    pub found: Option<u64>,
    pub oracle_queries: u64,
    pub non_oracle_basic_gates: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultipointOptions {
    /// Scheduling of the inner single-element search.
    pub x: usize,
    pub family: Family,
}

impl Default for MultipointOptions {
    fn default() -> Self {
        MultipointOptions { x: 1, family: Family::Nested }
    }
}

/// Per-run cache of single-element search costs by search width.
#[derive(Default)]
pub struct CostCache(HashMap<usize, (u64, u64)>);

fn sample_outcome<R: Rng + ?Sized>(state: &Statevector, main: usize, rng: &mut R) -> u64 {
    let marginal = state.marginal(&qubit_range(0, main));
    let mut r = rng.random::<f64>() * marginal.iter().sum::<f64>();
    for (i, p) in marginal.iter().enumerate() {
        if r < *p {
            return i as u64;
        }
        r -= p;
    }
    marginal.iter().rposition(|p| *p > 0.0).unwrap_or(0) as u64
}

fn marked_fraction(oracle: &PhaseOracleSpec) -> f64 {
    oracle.marked_count() as f64 / (1u64 << oracle.num_qubits()) as f64
}

/// One pass of the known-`k` algorithm with a given hash. Returned elements
/// are always checked against the predicate.
pub fn multi_point_with_hash<R: Rng + ?Sized>(
    oracle: &PhaseOracleSpec,
    k: usize,
    h: &AffineMap,
    opts: &MultipointOptions,
    cache: &mut CostCache,
    rng: &mut R,
) -> Result<TrialRecord, MultipointError> {
    let n = oracle.num_qubits();
    let mut record = TrialRecord {
        k,
        kind: TrialKind::EmptyKernel,
        d: None,
        marked_in_kernel: None,
        success_probability: 0.0,
        found: None,
        oracle_queries: 0,
        non_oracle_basic_gates: 0,
    };
    let Some(g) = parametrize_kernel(h) else {
        return Ok(record);
    };
    record.d = Some(g.d);
    if g.d + k >= n + 2 {
        record.kind = TrialKind::KernelTooLarge;
        return Ok(record);
    }
    let restricted = RestrictedOracle::new(oracle.clone(), g)?;
    if restricted.d() == 0 {
        let x = restricted.g.eval(0);
        let hit = oracle.is_marked(x);
        record.kind = TrialKind::SinglePoint;
        record.marked_in_kernel = Some(u64::from(hit));
        record.success_probability = f64::from(u8::from(hit));
        record.found = hit.then_some(x);
        record.oracle_queries = 1;
        return Ok(record);
    }
    record.kind = TrialKind::Quantum;
    let spec = restricted.spec()?;
    let sp_opts = SinglePointOptions { x: opts.x, schedule: None, family: opts.family };
    let d = restricted.d();
    let marked = (0..1u64 << d).filter(|&i| spec.is_marked(i)).count() as u64;
    record.marked_in_kernel = Some(marked);

    let costs = match cache.0.get(&d) {
        Some(c) => *c,
        None => {
            let sp = build_single_point(&spec, &sp_opts)?;
            let r = sp.report();
            let c = (r.oracle_calls as u64, r.basic_gates as u64);
            cache.0.insert(d, c);
            c
        }
    };
    record.oracle_queries = costs.0;
    record.non_oracle_basic_gates = costs.1 + 2 * restricted.loader_gates() as u64 * costs.0;
    // With nothing marked in the kernel no outcome can verify, so the
    // statevector is not needed.
    if marked > 0 {
        let sp = build_single_point(&spec, &sp_opts)?;
        let state = sp.simulate()?;
        record.success_probability = sp.success_probability(&state, &spec);
        let i = sample_outcome(&state, d, rng);
        let x = restricted.g.eval(i);
        record.found = oracle.is_marked(x).then_some(x);
    }
    Ok(record)
}

/// The known-`k` algorithm: a classical guess when `k ≥ n − 2`, otherwise a
/// fresh hash from `H_{n,k}` followed by [`multi_point_with_hash`].
pub fn multi_point<R: Rng + ?Sized>(
    oracle: &PhaseOracleSpec,
    k: usize,
    opts: &MultipointOptions,
    cache: &mut CostCache,
    rng: &mut R,
) -> Result<TrialRecord, MultipointError> {
    let n = oracle.num_qubits();
    if k + 2 >= n {
        let x = rng.random::<u64>() & ((1u64 << n) - 1);
        let hit = oracle.is_marked(x);
        return Ok(TrialRecord {
            k,
            kind: TrialKind::ClassicalPick,
            d: None,
            marked_in_kernel: None,
            success_probability: marked_fraction(oracle),
            found: hit.then_some(x),
            oracle_queries: 1,
            non_oracle_basic_gates: 0,
        });
    }
    let h = sample_hash(n, k, rng)?;
    multi_point_with_hash(oracle, k, &h, opts, cache, rng)
}

/// Smallest `t` with `(15/16)^t ≤ 1 − p`, at least 1.
pub fn amplification_trials(p: f64) -> Result<usize, MultipointError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MultipointError::BadProbability(p));
    }
    let t = ((1.0 - p).ln() / (15.0f64 / 16.0).ln() - 1e-9).ceil();
    Ok((t as usize).max(1))
}

/// Repeats [`multi_point`] until one succeeds or the trial budget for `p`
/// is spent. Every trial is appended to `log`.
pub fn multi_point_amplified<R: Rng + ?Sized>(
    oracle: &PhaseOracleSpec,
    k: usize,
    p: f64,
    opts: &MultipointOptions,
    cache: &mut CostCache,
    rng: &mut R,
    log: &mut Vec<TrialRecord>,
) -> Result<Option<u64>, MultipointError> {
    for _ in 0..amplification_trials(p)? {
        let t = multi_point(oracle, k, opts, cache, rng)?;
        let found = t.found;
        log.push(t);
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownOutcome {
    pub found: Option<u64>,
    pub telemetry: SearchTelemetry,
    pub trials: Vec<TrialRecord>,
}

/// The unknown-`K` algorithm: for `i` from `n + 2` down to 2 and `j` from
/// `n + 2` down to `i`, run the amplified known-`k` search with `k = j`.
pub fn multi_point_unknown(
    oracle: &PhaseOracleSpec,
    p: f64,
    opts: &MultipointOptions,
    seed: u64,
) -> Result<UnknownOutcome, MultipointError> {
    amplification_trials(p)?;
    let n = oracle.num_qubits();
    let mut rng = trial_rng(seed, 0);
    let mut cache = CostCache::default();
    let mut trials = Vec::new();
    let mut found = None;
    'outer: for i in (2..=n + 2).rev() {
        for j in (i..=n + 2).rev() {
            found = multi_point_amplified(oracle, j, p, opts, &mut cache, &mut rng, &mut trials)?;
            if found.is_some() {
                break 'outer;
            }
        }
    }
    let mut telemetry = SearchTelemetry { seed, ..Default::default() };
    trials.iter().for_each(|t| telemetry.add(t));
    Ok(UnknownOutcome { found, telemetry, trials })
}

/// `run,trial,k,kind,d,marked_in_kernel,success_probability,found,oracle_queries,non_oracle_basic_gates`
pub fn trials_csv<'a>(runs: impl IntoIterator<Item = (usize, &'a [TrialRecord])>) -> String {
    let mut out = String::from(
        "run,trial,k,kind,d,marked_in_kernel,success_probability,found,oracle_queries,non_oracle_basic_gates\n",
    );
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (run, trials) in runs {
        for (i, t) in trials.iter().enumerate() {
            let kind = serde_json::to_value(t.kind).expect("unit enum").as_str().unwrap_or_default().to_string();
            writeln!(
                out,
                "{run},{i},{},{kind},{},{},{},{},{},{}",
                t.k,
                opt(t.d.map(|d| d as u64)),
                opt(t.marked_in_kernel),
                t.success_probability,
                opt(t.found),
                t.oracle_queries,
                t.non_oracle_basic_gates
            )
            .unwrap();
        }
    }
    out
}

/// `1 + ⌈log₂ K⌉`.
pub fn k_for_count(marked: usize) -> usize {
    assert!(marked >= 1);
    1 + marked.next_power_of_two().trailing_zeros() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::{all_hashes, BitMatrix};
    use crate::sim::{unitary_equiv, EquivDomain, EquivOptions, OracleBindings};
    use proptest::prelude::*;

    fn param(n: usize, columns: &[u64], p: u64) -> KernelParam {
        KernelParam { c: BitMatrix::from_columns(n, columns).unwrap(), p, d: columns.len() }
    }

    #[test]
    fn dg_examples() {
        let id = param(3, &[1, 2, 4], 0);
        let dg = build_dg(&id);
        assert_eq!(dg.len(), 3);
        assert!(dg.gates().iter().all(|g| g.kind() == "CX"));

        let constant = param(3, &[], 0b101);
        assert_eq!(build_dg(&constant).gates(), &[Gate::X(Qubit(0)), Gate::X(Qubit(2))]);

        // C = (1,1)ᵀ, X on the second output qubit
        let g = param(2, &[0b11], 0b01);
        let dg = build_dg(&g);
        assert_eq!(
            dg.gates(),
            &[Gate::X(Qubit(2)), Gate::cx(Qubit(0), Qubit(1)), Gate::cx(Qubit(0), Qubit(2))]
        );
        let none = OracleBindings::new();
        for (i, expected) in [(0usize, 0b0_01usize), (1, 0b1_10)] {
            let mut s = Statevector::basis(3, i << 2).unwrap();
            s.apply_circuit(&dg, &none).unwrap();
            assert_eq!(s.probability(expected), 1.0);
        }
    }

    #[test]
    fn dg_dependency_matches_column_weight() {
        let g = param(4, &[0b1011, 0b0100], 0b0110);
        let dg = build_dg(&g);
        for t in 0..2 {
            let deps = crate::circuit::depends_on(&dg, Qubit(t)).len();
            assert_eq!(deps, g.c.column_weight(1 - t));
        }
    }

    #[test]
    fn restricted_circuit_matches_predicate() {
        let mut rng = trial_rng(11, 0);
        for _ in 0..6 {
            let n = 5;
            let oracle = PhaseOracleSpec::from_marked(n, [3, 9, 17, 30]);
            let h = sample_hash(n, 2, &mut rng).unwrap();
            let Some(g) = parametrize_kernel(&h) else { continue };
            let r = restrict_oracle(&oracle, &g).unwrap();
            let circuit = r.circuit("O");
            let b = OracleBindings::new().with("O", oracle.clone()).with("Og", r.spec().unwrap());
            // zero work register: a phase oracle marking f∘g
            let mut reference = Circuit::new(r.d(), 0);
            reference.push(Gate::oracle("Og", qubit_range(0, r.d())));
            let opts = EquivOptions { domain: EquivDomain::ZeroAncilla, ..Default::default() };
            assert!(unitary_equiv(&circuit, &reference, &b, opts).unwrap().equivalent);
            // every basis state: phase f(s ⊕ g(i)) with the register restored
            let all = r.total_qubits();
            for idx in 0..1usize << all {
                let i = (idx >> n) as u64;
                let s = (idx & ((1 << n) - 1)) as u64;
                let mut st = Statevector::basis(all, idx).unwrap();
                st.apply_circuit(&circuit, &b).unwrap();
                let sign = if oracle.is_marked(s ^ g.eval(i)) { -1.0 } else { 1.0 };
                assert!((st.amplitude_at(idx).re - sign).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lifted_decomposition_is_valid() {
        let n = 4;
        let marked = [5u64];
        let base = PhaseOracleSpec::from_marked(n, marked);
        // O_u: X on zero bits of 5 = 0101 then a 4-controlled Z on the flags
        let mut u = Circuit::new(n, 0);
        for q in [0, 2] {
            u.push(Gate::X(Qubit(q)));
        }
        let mut ph = Circuit::new(n, 0);
        ph.push(Gate::MultiControlledZ(qubit_range(0, n)));
        let dec = UncomputableDecomposition::new(u, ph).unwrap();
        dec.validate(&base, &OracleBindings::new()).unwrap();
        let base = base.with_decomposition(dec);
        let h = AffineMap::new(BitMatrix::from_rows(n, vec![0b0011]).unwrap(), 0).unwrap();
        let g = parametrize_kernel(&h).unwrap();
        let r = restrict_oracle(&base, &g).unwrap();
        let spec = r.spec().unwrap();
        spec.decomposition().unwrap().validate(&spec, &OracleBindings::new()).unwrap();
    }

    #[test]
    fn disjoint_image_marks_nothing() {
        let oracle = PhaseOracleSpec::from_marked(3, [1]);
        let h = AffineMap::new(BitMatrix::from_rows(3, vec![0b001]).unwrap(), 0).unwrap();
        let g = parametrize_kernel(&h).unwrap();
        let spec = restrict_oracle(&oracle, &g).unwrap().spec().unwrap();
        assert_eq!(spec.marked_count(), 0);
    }

    #[test]
    fn trial_counts() {
        assert_eq!(amplification_trials(1.0 / 16.0).unwrap(), 1);
        assert_eq!(amplification_trials(0.5).unwrap(), 11);
        assert!((15.0f64 / 16.0).powi(11) <= 0.5);
        assert!((15.0f64 / 16.0).powi(10) > 0.5);
        assert_eq!(amplification_trials(1e-12).unwrap(), 1);
        assert!(amplification_trials(1.0).is_err());
        assert_eq!(k_for_count(1), 1);
        assert_eq!(k_for_count(4), 3);
        assert_eq!(k_for_count(5), 4);
    }

    #[test]
    fn everything_marked_is_found_immediately() {
        let oracle = PhaseOracleSpec::from_predicate(6, |_| true);
        let out = multi_point_unknown(&oracle, 0.3, &MultipointOptions::default(), 1).unwrap();
        assert!(out.found.is_some());
        assert_eq!(out.telemetry.trials, 1);
        assert_eq!(out.trials[0].kind, TrialKind::ClassicalPick);
    }

    #[test]
    fn exhaustive_hash_success_n4() {
        let n = 4;
        for set in [vec![6u64], vec![0, 15], vec![1, 2, 4], vec![3, 5, 6, 9, 12]] {
            let oracle = PhaseOracleSpec::from_marked(n, set.clone());
            let k = k_for_count(set.len());
            let p = if k + 2 >= n {
                marked_fraction(&oracle)
            } else {
                let mut cache = CostCache::default();
                let mut rng = trial_rng(0, 0);
                let hashes: Vec<AffineMap> = all_hashes(n, k).collect();
                let total: f64 = hashes
                    .iter()
                    .map(|h| {
                        multi_point_with_hash(&oracle, k, h, &MultipointOptions::default(), &mut cache, &mut rng)
                            .unwrap()
                            .success_probability
                    })
                    .sum();
                total / hashes.len() as f64
            };
            assert!(p >= 1.0 / 16.0, "{set:?}: {p}");
        }
    }

    #[test]
    fn unknown_search_finds_single_target() {
        let oracle = PhaseOracleSpec::single(8, 77);
        let out = multi_point_unknown(&oracle, 0.3, &MultipointOptions::default(), 5).unwrap();
        if let Some(x) = out.found {
            assert_eq!(x, 77);
        }
        let queries: u64 = out.trials.iter().map(|t| t.oracle_queries).sum();
        assert_eq!(queries, out.telemetry.oracle_queries);
        let csv = trials_csv([(0usize, out.trials.as_slice())]);
        assert_eq!(csv.lines().count(), out.trials.len() + 1);
    }

    #[test]
    fn planned_queries_match_circuit() {
        let oracle = PhaseOracleSpec::from_marked(8, [5, 77, 200]);
        let mut rng = trial_rng(3, 0);
        let mut cache = CostCache::default();
        for _ in 0..20 {
            let h = sample_hash(8, 3, &mut rng).unwrap();
            let t = multi_point_with_hash(&oracle, 3, &h, &MultipointOptions::default(), &mut cache, &mut rng).unwrap();
            if t.kind == TrialKind::Quantum {
                let g = parametrize_kernel(&h).unwrap();
                let spec = restrict_oracle(&oracle, &g).unwrap().spec().unwrap();
                let sp = build_single_point(&spec, &SinglePointOptions::default()).unwrap();
                assert_eq!(t.oracle_queries, sp.circuit.oracle_calls() as u64);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn restriction_pulls_back_marked_set(seed in any::<u64>(), k in 1usize..5) {
            let n = 7;
            let mut rng = trial_rng(seed, 0);
            let marked: Vec<u64> = (0..5).map(|_| rng.random_range(0..1u64 << n)).collect();
            let oracle = PhaseOracleSpec::from_marked(n, marked.clone());
            let h = sample_hash(n, k, &mut rng).unwrap();
            if let Some(g) = parametrize_kernel(&h) {
                let spec = restrict_oracle(&oracle, &g).unwrap().spec().unwrap();
                let mut pulled: Vec<u64> = spec.marked_elements().into_iter().map(|i| g.eval(i)).collect();
                pulled.sort();
                let mut expected: Vec<u64> = oracle.marked_elements().into_iter().filter(|&x| h.eval(x) == 0).collect();
                expected.sort();
                prop_assert_eq!(pulled, expected);
            }
        }
    }
}
