//! Nested-diffuser search circuits and certainty-tuned amplitude
//! amplification.
//!
//! A schedule `k̄ = (k_1, …, k_m)` splits `n = Σ k_j` qubits into
//! consecutive blocks. The nested circuit `W_j` runs, in time order,
//! `W_{j−1}, O, W_{j−1}†, G_j, W_{j−1}` where `G_j` is the diffuser on
//! block `j`; the tree circuit `D_j` runs `D_{j−1}, O, G_j, D_{j−1}`.
//! Starting from the uniform state, both leave an amplitude on the marked
//! element that depends only on `k̄`, which lets amplitude amplification be
//! tuned to succeed with certainty.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{count_gates, qubit_range, Circuit, CountLevel, Gate, Qubit};
use crate::sim::{OracleBindings, PhaseOracleSpec, SimError, Statevector};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("schedule entries must be positive")]
    ZeroBlock,
    #[error("invalid schedule {0:?}: expected comma-separated positive integers")]
    BadSchedule(String),
    #[error("n and x must be at least 1")]
    BadParams,
    #[error("diffuser qubits must be non-empty and distinct")]
    BadDiffuser,
    #[error("success probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("schedule covers {schedule} qubits but the oracle has {oracle}")]
    WidthMismatch { schedule: usize, oracle: usize },
    #[error("search did not succeed with certainty (success {0}); the oracle does not mark exactly one element")]
    NotUnique(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Block sizes `k̄`, all positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DiffuserSchedule(Vec<usize>);

impl DiffuserSchedule {
    pub fn new(ks: Vec<usize>) -> Result<Self, SearchError> {
        if ks.contains(&0) {
            return Err(SearchError::ZeroBlock);
        }
        Ok(DiffuserSchedule(ks))
    }

    pub fn ks(&self) -> &[usize] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn n(&self) -> usize {
        self.0.iter().sum()
    }

    /// Qubits of block `j` (0-based).
    pub fn block(&self, j: usize) -> Vec<Qubit> {
        let start: usize = self.0[..j].iter().sum();
        qubit_range(start, start + self.0[j])
    }
}

impl TryFrom<Vec<usize>> for DiffuserSchedule {
    type Error = SearchError;
    fn try_from(v: Vec<usize>) -> Result<Self, SearchError> {
        Self::new(v)
    }
}

impl From<DiffuserSchedule> for Vec<usize> {
    fn from(s: DiffuserSchedule) -> Self {
        s.0
    }
}

impl fmt::Display for DiffuserSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for DiffuserSchedule {
    type Err = SearchError;
    fn from_str(s: &str) -> Result<Self, SearchError> {
        let ks = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| SearchError::BadSchedule(s.to_string()))?;
        Self::new(ks).map_err(|_| SearchError::BadSchedule(s.to_string()))
    }
}

/// Blocks of size `(x+1)j` for as many `j` as fit in `n`, with the last
/// block absorbing the remainder. When even one block of `x+1` does not
/// fit, the schedule is the single block `(n)`.
pub fn schedule_from_x(n: usize, x: usize) -> Result<DiffuserSchedule, SearchError> {
    if n == 0 || x == 0 {
        return Err(SearchError::BadParams);
    }
    let step = x + 1;
    let m = (1..).take_while(|&k| step * k * (k + 1) / 2 <= n).last().unwrap_or(1);
    let mut ks: Vec<usize> = (1..m).map(|j| step * j).collect();
    ks.push(n - ks.iter().sum::<usize>());
    DiffuserSchedule::new(ks)
}

pub fn build_diffuser(qubits: Vec<Qubit>) -> Result<Gate, SearchError> {
    let distinct = qubits.iter().enumerate().all(|(i, q)| !qubits[..i].contains(q));
    if qubits.is_empty() || !distinct {
        return Err(SearchError::BadDiffuser);
    }
    Ok(Gate::Diffuser(qubits))
}

/// `W_m` on `n = Σ k_j` qubits, oracle calls on all of them.
pub fn build_w(schedule: &DiffuserSchedule, oracle_tag: &str) -> Circuit {
    build_w_level(schedule, schedule.m(), oracle_tag)
}

/// `W_j` for the first `j` blocks, still on all `n` qubits.
pub fn build_w_level(schedule: &DiffuserSchedule, level: usize, oracle_tag: &str) -> Circuit {
    let n = schedule.n();
    let oracle = Gate::oracle(oracle_tag, qubit_range(0, n));
    let mut w = Circuit::new(n, 0);
    for j in 0..level {
        let prev = w.clone();
        w.push(oracle.clone());
        w.append_inverse(&prev);
        w.push(Gate::Diffuser(schedule.block(j)));
        w.append(&prev);
    }
    w
}

/// `D_m` on `n = Σ k_j` qubits.
pub fn build_d(schedule: &DiffuserSchedule, oracle_tag: &str) -> Circuit {
    build_d_level(schedule, schedule.m(), oracle_tag)
}

/// `D_j` for the first `j` blocks, still on all `n` qubits.
pub fn build_d_level(schedule: &DiffuserSchedule, level: usize, oracle_tag: &str) -> Circuit {
    let n = schedule.n();
    let oracle = Gate::oracle(oracle_tag, qubit_range(0, n));
    let mut d = Circuit::new(n, 0);
    for j in 0..level {
        let prev = d.clone();
        d.push(oracle.clone());
        d.push(Gate::Diffuser(schedule.block(j)));
        d.append(&prev);
    }
    d
}

/// Amplitudes after each level, index 0 being the empty circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AmplitudeTrace(pub Vec<f64>);

impl AmplitudeTrace {
    pub fn last(&self) -> f64 {
        *self.0.last().expect("trace starts with the level-0 value")
    }
}

/// Marked-element amplitude of `W_j` applied to the uniform state:
/// `α_j = 2^{−k_j/2} (3 − 4·2^{−k_j}) α_{j−1}`, `α_0 = 1`.
pub fn alpha_recurrence(schedule: &DiffuserSchedule) -> AmplitudeTrace {
    let mut trace = vec![1.0];
    for &k in schedule.ks() {
        let p = 0.5f64.powi(k as i32);
        trace.push(p.sqrt() * (3.0 - 4.0 * p) * trace.last().unwrap());
    }
    AmplitudeTrace(trace)
}

/// Marked-element amplitude of `D_j` applied to the uniform state:
/// `β_j = 2^{−s_j/2} (1 − 2·2^{−k_j}) + 2^{−k_j/2} (2 − 2·2^{−k_j}) β_{j−1}`
/// with `s_j = k_1 + … + k_j` and `β_0 = 1`.
pub fn beta_recurrence(schedule: &DiffuserSchedule) -> AmplitudeTrace {
    let mut trace = vec![1.0];
    let mut s = 0;
    for &k in schedule.ks() {
        s += k;
        let p = 0.5f64.powi(k as i32);
        let first = 0.5f64.powf(s as f64 / 2.0) * (1.0 - 2.0 * p);
        trace.push(first + p.sqrt() * (2.0 - 2.0 * p) * trace.last().unwrap());
    }
    AmplitudeTrace(trace)
}

/// Simulated counterpart of [`Family::trace`]: the marked amplitude after
/// each level, rescaled by `2^{(n − s_j)/2}` to the first `s_j` qubits.
pub fn simulated_trace(family: Family, schedule: &DiffuserSchedule, target: u64) -> Result<AmplitudeTrace, SearchError> {
    let n = schedule.n();
    let bindings = OracleBindings::new().with(ORACLE_TAG, PhaseOracleSpec::single(n, target));
    let mut trace = vec![1.0];
    let mut covered = 0;
    for j in 1..=schedule.m() {
        covered += schedule.ks()[j - 1];
        let circuit = match family {
            Family::Nested => build_w_level(schedule, j, ORACLE_TAG),
            Family::Tree => build_d_level(schedule, j, ORACLE_TAG),
        };
        let mut state = Statevector::uniform(n)?;
        state.apply_circuit(&circuit, &bindings)?;
        trace.push(state.amplitude_at(target as usize).norm() * 2f64.powf((n - covered) as f64 / 2.0));
    }
    Ok(AmplitudeTrace(trace))
}

/// `I − 2|0…0⟩⟨0…0|` on the listed qubits.
pub fn f0_gates(qubits: &[Qubit]) -> Vec<Gate> {
    let mut g: Vec<Gate> = qubits.iter().map(|q| Gate::X(*q)).collect();
    g.push(Gate::MultiControlledZ(qubits.to_vec()));
    g.extend(qubits.iter().map(|q| Gate::X(*q)));
    g
}

pub fn f0_circuit(n: usize) -> Circuit {
    let mut c = Circuit::new(n, 0);
    c.extend(f0_gates(&qubit_range(0, n)));
    c
}

/// The good-state reflection used inside amplitude amplification.
pub trait GoodOracle {
    /// Emits one query. With a deflation qubit, only states where it is
    /// |0⟩ count as good.
    fn emit(&self, out: &mut Circuit, deflation: Option<Qubit>);
}

/// A phase oracle bound by tag. The deflated variant is a separate tag
/// whose input is the oracle's qubits followed by the deflation qubit; bind
/// it to [`deflated_oracle`].
#[derive(Clone, Debug)]
pub struct TaggedOracle {
    pub tag: String,
    pub deflated_tag: String,
    pub qubits: Vec<Qubit>,
}

impl GoodOracle for TaggedOracle {
    fn emit(&self, out: &mut Circuit, deflation: Option<Qubit>) {
        match deflation {
            None => out.push(Gate::oracle(self.tag.clone(), self.qubits.clone())),
            Some(d) => {
                let mut qs = self.qubits.clone();
                qs.push(d);
                out.push(Gate::oracle(self.deflated_tag.clone(), qs));
            }
        }
    }
}

/// A compiled oracle `O_u† · Z(flag) · O_u` whose phase part is a Z on a
/// single flag qubit.
#[derive(Clone, Debug)]
pub struct FlagOracle {
    pub uncompute: Circuit,
    pub flag: Qubit,
}

impl GoodOracle for FlagOracle {
    fn emit(&self, out: &mut Circuit, deflation: Option<Qubit>) {
        out.append(&self.uncompute);
        match deflation {
            None => out.push(Gate::Z(self.flag)),
            Some(d) => {
                out.push(Gate::X(d));
                out.push(Gate::MultiControlledZ(vec![self.flag, d]));
                out.push(Gate::X(d));
            }
        }
        out.append_inverse(&self.uncompute);
    }
}

/// `f'(x, a) = f(x) ∧ a = 0` on `n + 1` bits, the deflation bit last.
pub fn deflated_oracle(spec: &PhaseOracleSpec) -> PhaseOracleSpec {
    let base = spec.clone();
    PhaseOracleSpec::from_predicate(spec.num_qubits() + 1, move |x| x & 1 == 0 && base.is_marked(x >> 1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AaPlan {
    /// Success probability of the base circuit.
    pub a: f64,
    pub theta: f64,
    pub iterations: usize,
    /// Deflation rotation; the good amplitude is scaled by `cos φ`.
    pub deflation_angle: f64,
    pub base_oracle_calls: usize,
    /// `(2s + 1)·base + s`.
    pub total_oracle_calls: usize,
}

const PHI_ZERO: f64 = 1e-12;

/// Iteration count and deflation angle for a base success probability
/// `a`: `s = ⌈π/(4θ) − 1/2⌉`, `θ' = π/(4s + 2)`, `cos φ = sin θ' / sin θ`.
pub fn plan_amplification(a: f64, base_oracle_calls: usize) -> Result<AaPlan, SearchError> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(SearchError::BadProbability(a));
    }
    let theta = a.sqrt().asin();
    let s = (PI / (4.0 * theta) - 0.5 - 1e-9).ceil().max(0.0) as usize;
    let ratio = ((PI / (4 * s + 2) as f64).sin() / theta.sin()).min(1.0);
    let phi = if 1.0 - ratio < PHI_ZERO { 0.0 } else { ratio.acos() };
    Ok(AaPlan {
        a,
        theta,
        iterations: s,
        deflation_angle: phi,
        base_oracle_calls,
        total_oracle_calls: (2 * s + 1) * base_oracle_calls + s,
    })
}

/// Wraps `base` (success probability `a` when measured against `good`) in
/// amplitude amplification that succeeds with certainty:
/// `A', then s × (O', A'†, F_0, A')`, where `A'` adds a deflation qubit
/// (last in the register) rotated by `RY(2φ)` when `φ > 0`.
pub fn aa_wrap_certain(
    base: &Circuit,
    base_oracle_calls: usize,
    good: &dyn GoodOracle,
    a: f64,
) -> Result<(Circuit, AaPlan), SearchError> {
    let plan = plan_amplification(a, base_oracle_calls)?;
    if plan.iterations == 0 {
        return Ok((base.clone(), plan));
    }
    let deflate = plan.deflation_angle > 0.0;
    let extra = usize::from(deflate);
    let mut a_prime = Circuit::new(base.num_main(), base.num_ancilla() + extra);
    let deflation = deflate.then(|| Qubit(base.num_qubits()));
    if let Some(d) = deflation {
        a_prime.push(Gate::ry(d, 2.0 * plan.deflation_angle));
    }
    a_prime.append(base);
    let everything = qubit_range(0, a_prime.num_qubits());

    let mut out = a_prime.clone();
    for _ in 0..plan.iterations {
        good.emit(&mut out, deflation);
        out.append_inverse(&a_prime);
        out.extend(f0_gates(&everything));
        out.append(&a_prime);
    }
    Ok((out, plan))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Nested,
    Tree,
}

impl Family {
    pub fn build(self, schedule: &DiffuserSchedule, oracle_tag: &str) -> Circuit {
        match self {
            Family::Nested => build_w(schedule, oracle_tag),
            Family::Tree => build_d(schedule, oracle_tag),
        }
    }

    pub fn trace(self, schedule: &DiffuserSchedule) -> AmplitudeTrace {
        match self {
            Family::Nested => alpha_recurrence(schedule),
            Family::Tree => beta_recurrence(schedule),
        }
    }

    pub fn oracle_calls(self, m: usize) -> usize {
        match self {
            Family::Nested => (3usize.pow(m as u32) - 1) / 2,
            Family::Tree => (1 << m) - 1,
        }
    }
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nested" | "w" => Ok(Family::Nested),
            "tree" | "d" => Ok(Family::Tree),
            other => Err(format!("unknown circuit family {other:?} (expected nested or tree)")),
        }
    }
}

/// `(π/4)·(1 − 2^{−x} − 2^{−2x})^{−1}·2^{n/2} + 2·3^m − 2`.
pub fn query_bound(n: usize, x: usize, m: usize) -> f64 {
    let q = 0.5f64.powi(x as i32);
    PI / 4.0 / (1.0 - q - q * q) * 2f64.powf(n as f64 / 2.0) + 2.0 * 3f64.powi(m as i32) - 2.0
}

/// `⌈(π/4)·2^{n/2}⌉`, the query count of optimal search for one marked
/// element among `2^n`.
pub fn optimal_query_reference(n: usize) -> u64 {
    (PI / 4.0 * 2f64.powf(n as f64 / 2.0)).ceil() as u64
}

/// Query and gate telemetry of the single-point pipeline, without simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub x: usize,
    pub schedule: DiffuserSchedule,
    pub oracle_queries: usize,
    pub reference: u64,
    /// `oracle_queries / reference`.
    pub ratio: f64,
    pub query_bound: f64,
    pub non_oracle_basic_gates: usize,
    /// Non-oracle basic gates divided by `2^{n/2}`.
    pub gates_per_sqrt_n: f64,
}

pub fn bench_row(n: usize, x: usize) -> Result<BenchRow, SearchError> {
    let spec = PhaseOracleSpec::single(n, 0);
    let sp = build_single_point(&spec, &SinglePointOptions { x, ..Default::default() })?;
    let r = sp.report();
    let reference = optimal_query_reference(n);
    Ok(BenchRow {
        n,
        x,
        oracle_queries: r.oracle_calls,
        reference,
        ratio: r.oracle_calls as f64 / reference as f64,
        query_bound: query_bound(n, x, r.schedule.m()),
        non_oracle_basic_gates: r.basic_gates,
        gates_per_sqrt_n: r.basic_gates as f64 / 2f64.powf(n as f64 / 2.0),
        schedule: r.schedule,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinglePointOptions {
    pub x: usize,
    /// Overrides the schedule derived from `x`.
    pub schedule: Option<DiffuserSchedule>,
    pub family: Family,
}

impl Default for SinglePointOptions {
    fn default() -> Self {
        SinglePointOptions { x: 1, schedule: None, family: Family::Nested }
    }
}

pub const ORACLE_TAG: &str = "O";
pub const DEFLATED_TAG: &str = "O_deflated";

/// The full single-element search circuit (`H^{⊗n}`, then `W_m` or `D_m`,
/// wrapped in amplitude amplification) and its bindings.
#[derive(Clone, Debug)]
pub struct SinglePointCircuit {
    pub circuit: Circuit,
    pub bindings: OracleBindings,
    pub schedule: DiffuserSchedule,
    pub family: Family,
    pub trace: AmplitudeTrace,
    pub plan: AaPlan,
    pub num_main: usize,
    pub x: Option<usize>,
}

/// Summary of one single-point search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinglePointReport {
    pub schedule: DiffuserSchedule,
    pub family: Family,
    pub alpha_trace: AmplitudeTrace,
    pub aa_plan: AaPlan,
    pub oracle_calls: usize,
    /// Non-oracle gates after lowering to CX + one-qubit gates.
    pub basic_gates: usize,
    pub logical_gates: usize,
    pub qubits: usize,
    /// Query bound for schedules derived from `x` (nested family only).
    pub query_bound: Option<f64>,
    pub success_probability: Option<f64>,
    pub found: Option<u64>,
}

pub fn build_single_point(
    oracle: &PhaseOracleSpec,
    opts: &SinglePointOptions,
) -> Result<SinglePointCircuit, SearchError> {
    let n = oracle.num_qubits();
    let schedule = match &opts.schedule {
        Some(s) => s.clone(),
        None => schedule_from_x(n, opts.x)?,
    };
    if schedule.n() != n {
        return Err(SearchError::WidthMismatch { schedule: schedule.n(), oracle: n });
    }
    let mut base = Circuit::new(n, 0);
    base.extend(qubit_range(0, n).into_iter().map(Gate::H));
    base.append(&opts.family.build(&schedule, ORACLE_TAG));
    let trace = opts.family.trace(&schedule);
    let a = (trace.last() * trace.last()).min(1.0);
    let good = TaggedOracle { tag: ORACLE_TAG.into(), deflated_tag: DEFLATED_TAG.into(), qubits: qubit_range(0, n) };
    let (circuit, plan) = aa_wrap_certain(&base, base.oracle_calls(), &good, a)?;
    let bindings = OracleBindings::new().with(ORACLE_TAG, oracle.clone()).with(DEFLATED_TAG, deflated_oracle(oracle));
    Ok(SinglePointCircuit {
        circuit,
        bindings,
        schedule,
        family: opts.family,
        trace,
        plan,
        num_main: n,
        x: opts.schedule.is_none().then_some(opts.x),
    })
}

impl SinglePointCircuit {
    pub fn simulate(&self) -> Result<Statevector, SearchError> {
        let mut s = Statevector::zero_state(self.circuit.num_qubits())?;
        s.apply_circuit(&self.circuit, &self.bindings)?;
        Ok(s)
    }

    /// Probability that the main register measures a marked element.
    pub fn success_probability(&self, state: &Statevector, oracle: &PhaseOracleSpec) -> f64 {
        state.success_probability(&qubit_range(0, self.num_main), |x| oracle.is_marked(x))
    }

    pub fn report(&self) -> SinglePointReport {
        let counts = count_gates(&self.circuit, CountLevel::Logical);
        let bound = match (self.x, self.family) {
            (Some(x), Family::Nested) => Some(query_bound(self.num_main, x, self.schedule.m())),
            _ => None,
        };
        SinglePointReport {
            schedule: self.schedule.clone(),
            family: self.family,
            alpha_trace: self.trace.clone(),
            aa_plan: self.plan.clone(),
            oracle_calls: counts.oracle_calls,
            basic_gates: counts.basic_equivalent,
            logical_gates: counts.total,
            qubits: self.circuit.num_qubits(),
            query_bound: bound,
            success_probability: None,
            found: None,
        }
    }
}

/// Finds the element marked by a single-element oracle: builds the search
/// circuit, simulates it, and returns the most likely main-register outcome
/// after checking it against the predicate.
pub fn single_point(oracle: &PhaseOracleSpec, opts: &SinglePointOptions) -> Result<SinglePointReport, SearchError> {
    let sp = build_single_point(oracle, opts)?;
    let state = sp.simulate()?;
    let p = sp.success_probability(&state, oracle);
    let marginal = state.marginal(&qubit_range(0, sp.num_main));
    let best = marginal
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i as u64)
        .expect("non-empty register");
    if p < 1.0 - 1e-6 || !oracle.is_marked(best) {
        return Err(SearchError::NotUnique(p));
    }
    let mut report = sp.report();
    report.success_probability = Some(p);
    report.found = Some(best);
    Ok(report)
}
