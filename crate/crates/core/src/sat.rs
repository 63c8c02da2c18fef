//! CNF formulas compiled into reversible phase oracles, and the
//! unique-solution solver built on the nested search with partial
//! uncomputation.
//!
//! Variable `v` (1-based) lives on main qubit `v − 1`, so an assignment is
//! the basis index of the main register with `x_1` as its most significant
//! bit.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{qubit_range, Circuit, Gate, Qubit};
use crate::search::{
    aa_wrap_certain, alpha_recurrence, schedule_from_x, AaPlan, DiffuserSchedule, FlagOracle, SearchError,
};
use crate::sim::{OracleBindings, PhaseOracleSpec, SimError, SparseState};
use crate::uncompute::{
    average_per_query, dependency_relabeling, rewrite, w_as_generic, AverageMode, DecompositionManifest,
    RewriteReport, UncomputableDecomposition, UncomputeError,
};

#[derive(Debug, Error)]
pub enum SatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("header declares {expected} {what} but found {found}")]
    CountMismatch { what: &'static str, expected: usize, found: usize },
    #[error("literal {literal} references a variable outside 1..={num_vars}")]
    VariableOutOfRange { literal: i64, num_vars: usize },
    #[error("formula has no clauses")]
    NoClauses,
    #[error("search did not isolate a unique assignment (success {0})")]
    NotUnique(f64),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Uncompute(#[from] UncomputeError),
}

/// A non-zero DIMACS literal: `+v` or `−v`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Literal(i64);

impl Literal {
    pub fn new(value: i64) -> Option<Self> {
        (value != 0).then_some(Literal(value))
    }

    pub fn var(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    pub fn positive(self) -> bool {
        self.0 > 0
    }

    pub fn value(self) -> i64 {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<Literal>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Self, SatError> {
        if clauses.is_empty() {
            return Err(SatError::NoClauses);
        }
        let mut out = Vec::with_capacity(clauses.len());
        for (i, c) in clauses.into_iter().enumerate() {
            if c.is_empty() {
                return Err(SatError::EmptyClause { line: i + 1 });
            }
            let lits = c
                .into_iter()
                .map(|l| match Literal::new(l) {
                    Some(lit) if lit.var() <= num_vars => Ok(lit),
                    _ => Err(SatError::VariableOutOfRange { literal: l, num_vars }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push(lits);
        }
        Ok(CnfFormula { num_vars, clauses: out })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    /// `c`.
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// `W`, the widest clause.
    pub fn width(&self) -> usize {
        self.clauses.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Literal occurrences of variable `v`.
    pub fn occurrences(&self, v: usize) -> usize {
        self.clauses.iter().flatten().filter(|l| l.var() == v).count()
    }

    pub fn value_of(&self, assignment: u64, v: usize) -> bool {
        assignment >> (self.num_vars - v) & 1 == 1
    }

    pub fn satisfies(&self, assignment: u64) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| self.value_of(assignment, l.var()) == l.positive()))
    }

    /// Every satisfying assignment, by enumeration.
    pub fn models(&self) -> Vec<u64> {
        assert!(self.num_vars <= 30, "brute force is limited to 30 variables");
        (0..1u64 << self.num_vars).filter(|&x| self.satisfies(x)).collect()
    }

    pub fn oracle_spec(&self) -> PhaseOracleSpec {
        let f = self.clone();
        PhaseOracleSpec::from_predicate(self.num_vars, move |x| f.satisfies(x))
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            let lits: Vec<String> = c.iter().map(|l| l.0.to_string()).collect();
            out.push_str(&lits.join(" "));
            out.push_str(" 0\n");
        }
        out
    }

    /// Renames variable `v` to `perm[v − 1] + 1`.
    pub fn relabel(&self, perm: &[usize]) -> CnfFormula {
        let clauses = self
            .clauses
            .iter()
            .map(|c| c.iter().map(|l| Literal(l.0.signum() * (perm[l.var() - 1] as i64 + 1))).collect())
            .collect();
        CnfFormula { num_vars: self.num_vars, clauses }
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clauses: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                let lits: Vec<String> =
                    c.iter().map(|l| format!("{}x{}", if l.positive() { "" } else { "¬" }, l.var())).collect();
                format!("({})", lits.join(" ∨ "))
            })
            .collect();
        write!(f, "{}", clauses.join(" ∧ "))
    }
}

/// Parses DIMACS CNF. Clauses may span lines; `c` lines are comments and a
/// `%` line ends the input.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, SatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i64>> = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        if t.starts_with('%') {
            break;
        }
        if let Some(rest) = t.strip_prefix('p') {
            if header.is_some() {
                return Err(SatError::Syntax { line, message: "second header".into() });
            }
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let parsed = match parts.as_slice() {
                ["cnf", v, c] => v.parse().ok().zip(c.parse().ok()),
                _ => None,
            };
            header = Some(parsed.ok_or_else(|| SatError::Syntax {
                line,
                message: format!("expected `p cnf <vars> <clauses>`, found {t:?}"),
            })?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(SatError::Syntax { line, message: "clause before `p cnf` header".into() });
        };
        for tok in t.split_whitespace() {
            let v: i64 =
                tok.parse().map_err(|_| SatError::Syntax { line, message: format!("bad literal {tok:?}") })?;
            if v == 0 {
                if current.is_empty() {
                    return Err(SatError::EmptyClause { line });
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                if v.unsigned_abs() as usize > num_vars {
                    return Err(SatError::VariableOutOfRange { literal: v, num_vars });
                }
                current.push(v);
            }
        }
    }
    let Some((num_vars, num_clauses)) = header else {
        return Err(SatError::Syntax { line: 0, message: "missing `p cnf` header".into() });
    };
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != num_clauses {
        return Err(SatError::CountMismatch { what: "clauses", expected: num_clauses, found: clauses.len() });
    }
    CnfFormula::new(num_vars, clauses)
}

/// Where each ancilla of the compiled oracle lives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncillaLayout {
    /// One qubit per literal, grouped by clause; holds the literal's negation.
    pub literals: Vec<Vec<Qubit>>,
    /// Internal nodes of each clause's conjunction tree, root last.
    pub clause_trees: Vec<Vec<Qubit>>,
    pub clauses: Vec<Qubit>,
    /// Internal nodes of the conjunction over clauses, root last.
    pub global_tree: Vec<Qubit>,
    pub root: Qubit,
    pub num_ancilla: usize,
}

struct Allocator {
    next: usize,
}

impl Allocator {
    fn take(&mut self) -> Qubit {
        self.next += 1;
        Qubit(self.next - 1)
    }
}

/// Conjunction of `inputs` into fresh qubits, pairing neighbours level by
/// level from the left; an odd leftover moves up unchanged. Returns the
/// top qubit and the internal nodes created.
fn and_tree(inputs: &[Qubit], alloc: &mut Allocator, out: &mut Circuit) -> (Qubit, Vec<Qubit>) {
    let mut level = inputs.to_vec();
    let mut nodes = Vec::new();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            match pair {
                [a, b] => {
                    let t = alloc.take();
                    out.push(Gate::ccx(*a, *b, t));
                    nodes.push(t);
                    next.push(t);
                }
                [a] => next.push(*a),
                _ => unreachable!(),
            }
        }
        level = next;
    }
    (level[0], nodes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledOracle {
    pub decomposition: UncomputableDecomposition,
    pub layout: AncillaLayout,
}

/// Builds `O_u` (literal negations, clause conjunction trees, clause
/// qubits by de Morgan, conjunction over clauses) and `O_p = Z(root)`.
pub fn compile_oracle(f: &CnfFormula) -> CompiledOracle {
    let n = f.num_vars();
    let c = f.num_clauses();
    let widths: Vec<usize> = f.clauses().iter().map(Vec::len).collect();
    let num_ancilla: usize = widths.iter().sum::<usize>()
        + widths.iter().map(|w| w - 1).sum::<usize>()
        + c
        + (c - 1);
    let mut u = Circuit::new(n, num_ancilla);
    let mut alloc = Allocator { next: n };

    let literals: Vec<Vec<Qubit>> = f
        .clauses()
        .iter()
        .map(|clause| {
            clause
                .iter()
                .map(|lit| {
                    let q = alloc.take();
                    u.push(Gate::cx(Qubit(lit.var() - 1), q));
                    if lit.positive() {
                        u.push(Gate::X(q));
                    }
                    q
                })
                .collect()
        })
        .collect();

    let mut clause_trees = Vec::with_capacity(c);
    let mut clauses = Vec::with_capacity(c);
    for lits in &literals {
        let (top, nodes) = and_tree(lits, &mut alloc, &mut u);
        clause_trees.push(nodes);
        let q = alloc.take();
        u.push(Gate::cx(top, q));
        u.push(Gate::X(q));
        clauses.push(q);
    }
    let (root, global_tree) = and_tree(&clauses, &mut alloc, &mut u);
    debug_assert_eq!(alloc.next, n + num_ancilla);

    let mut phase = Circuit::new(n, num_ancilla);
    phase.push(Gate::Z(root));
    let decomposition = UncomputableDecomposition::new(u, phase).expect("same register");
    CompiledOracle {
        decomposition,
        layout: AncillaLayout { literals, clause_trees, clauses, global_tree, root, num_ancilla },
    }
}

fn ceil_log2(x: usize) -> usize {
    x.next_power_of_two().trailing_zeros() as usize
}

/// `3Wc + 2c − 1`.
pub fn uncompute_gate_bound(f: &CnfFormula) -> usize {
    3 * f.width() * f.num_clauses() + 2 * f.num_clauses() - 1
}

/// `c_v (4 + ⌈log₂ W⌉ + ⌈log₂ c⌉)` with `c_v` the occurrences of `v`.
pub fn dependency_bound(f: &CnfFormula, v: usize) -> usize {
    f.occurrences(v) * (4 + ceil_log2(f.width()) + ceil_log2(f.num_clauses()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependencyProfile {
    /// `D_v` per variable, `x_1` first.
    pub per_variable: Vec<usize>,
    pub bounds: Vec<usize>,
    /// `Σ D_v / n`.
    pub average: f64,
    /// `W c (4 + ⌈log₂ W⌉ + ⌈log₂ c⌉) / n`.
    pub average_bound: f64,
}

impl DependencyProfile {
    pub fn within_bounds(&self) -> bool {
        self.per_variable.iter().zip(&self.bounds).all(|(d, b)| d <= b) && self.average <= self.average_bound
    }
}

pub fn dependency_profile(f: &CnfFormula, compiled: &CompiledOracle) -> DependencyProfile {
    let per_variable = compiled.decomposition.dependency_profile();
    let n = f.num_vars() as f64;
    let (w, c) = (f.width(), f.num_clauses());
    DependencyProfile {
        average: per_variable.iter().sum::<usize>() as f64 / n,
        bounds: (1..=f.num_vars()).map(|v| dependency_bound(f, v)).collect(),
        average_bound: (w * c * (4 + ceil_log2(w) + ceil_log2(c))) as f64 / n,
        per_variable,
    }
}

/// Compiled-oracle description for files: layout plus the gate ranges of
/// `O_u` and `O_p` in the accompanying circuit (`O_u`, `O_p`, `O_u†`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleManifest {
    pub num_vars: usize,
    pub num_clauses: usize,
    pub width: usize,
    pub layout: AncillaLayout,
    pub decomposition: DecompositionManifest,
    pub d_u: usize,
    pub d_p: usize,
    pub d_u_bound: usize,
}

impl CompiledOracle {
    pub fn manifest(&self, f: &CnfFormula) -> OracleManifest {
        let d_u = self.decomposition.d_u();
        let d_p = self.decomposition.d_p();
        OracleManifest {
            num_vars: f.num_vars(),
            num_clauses: f.num_clauses(),
            width: f.width(),
            layout: self.layout.clone(),
            decomposition: DecompositionManifest { uncompute: [0, d_u], phase: [d_u, d_u + d_p] },
            d_u,
            d_p,
            d_u_bound: uncompute_gate_bound(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub x: usize,
    pub schedule: Option<DiffuserSchedule>,
    /// Move the variables with the fewest dependent gates onto the qubits
    /// most often diffused.
    pub relabel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { x: 1, schedule: None, relabel: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatSolveReport {
    pub assignment: u64,
    /// `x_1 … x_n`.
    pub bits: String,
    pub success_probability: f64,
    pub schedule: DiffuserSchedule,
    pub aa_plan: AaPlan,
    pub oracle_queries: usize,
    pub qubits: usize,
    pub gates: usize,
    /// `perm[v − 1]` is the qubit carrying variable `v`.
    pub variable_qubits: Vec<usize>,
    pub rewrite: RewriteReport,
    pub average_exact: f64,
    pub average_weighted: f64,
    pub average_uniform: f64,
    /// Oracle-derived gates per query without the rewrite, `2 D_u + D_p`.
    pub average_unrewritten: f64,
}

/// Finds the unique satisfying assignment: the nested search over the
/// compiled oracle with partial uncomputation, wrapped in certainty-tuned
/// amplitude amplification, simulated sparsely on the full register.
pub fn solve_unique_sat(f: &CnfFormula, opts: &SolveOptions) -> Result<SatSolveReport, SatError> {
    let n = f.num_vars();
    let schedule = match &opts.schedule {
        Some(s) => s.clone(),
        None => schedule_from_x(n, opts.x)?,
    };
    if schedule.n() != n {
        return Err(SearchError::WidthMismatch { schedule: schedule.n(), oracle: n }.into());
    }
    let v = w_as_generic(&schedule, "O");
    let base = compile_oracle(f);
    let perm: Vec<usize> = if opts.relabel {
        dependency_relabeling(&base.decomposition.dependency_profile(), &v).into_iter().map(|q| q.0).collect()
    } else {
        (0..n).collect()
    };
    let relabeled = f.relabel(&perm);
    let compiled = compile_oracle(&relabeled);
    let dec = &compiled.decomposition;
    let (v_tilde, report) = rewrite(&v, dec)?;

    let mut a = Circuit::new(n, dec.num_ancilla());
    a.extend(qubit_range(0, n).into_iter().map(Gate::H));
    a.append(&v_tilde);
    let amp = alpha_recurrence(&schedule).last();
    let good = FlagOracle { uncompute: dec.uncompute().clone(), flag: compiled.layout.root };
    let (circuit, plan) = aa_wrap_certain(&a, v.ell(), &good, (amp * amp).min(1.0))?;

    let mut state = SparseState::zero_state(circuit.num_qubits())?;
    state.apply_circuit(&circuit, &OracleBindings::new())?;
    let main = qubit_range(0, n);
    let success = state.success_probability(&main, |x| relabeled.satisfies(x));
    let (best, _) = state
        .marginal(&main)
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("state is normalized");
    if success < 1.0 - 1e-9 || !relabeled.satisfies(best) {
        return Err(SatError::NotUnique(success));
    }
    // variable v sits on qubit perm[v − 1]
    let assignment = (1..=n).fold(0u64, |acc, var| (acc << 1) | (best >> (n - 1 - perm[var - 1]) & 1));
    debug_assert!(f.satisfies(assignment));
    Ok(SatSolveReport {
        assignment,
        bits: format!("{assignment:0n$b}"),
        success_probability: success,
        schedule,
        aa_plan: plan.clone(),
        oracle_queries: plan.total_oracle_calls,
        qubits: circuit.num_qubits(),
        gates: circuit.len(),
        variable_qubits: perm,
        average_exact: average_per_query(&report, AverageMode::Exact),
        average_weighted: average_per_query(&report, AverageMode::Weighted),
        average_uniform: average_per_query(&report, AverageMode::Uniform),
        average_unrewritten: (2 * dec.d_u() + dec.d_p()) as f64,
        rewrite: report,
    })
}

/// A formula over `n` variables with `c` clauses of width at most `w`
/// whose only model is a planted assignment, or `None` if rejection
/// sampling gives up. Every clause is satisfied by the planted model.
pub fn random_unique_formula<R: Rng + ?Sized>(n: usize, c: usize, w: usize, rng: &mut R) -> Option<CnfFormula> {
    assert!(n >= 1 && c >= 1 && w >= 1 && n <= 20);
    for _ in 0..2000 {
        let planted = rng.random_range(0..1u64 << n);
        let clauses: Vec<Vec<i64>> = (0..c)
            .map(|_| {
                let width = rng.random_range(1..=w.min(n));
                let mut vars = BTreeSet::new();
                while vars.len() < width {
                    vars.insert(rng.random_range(1..=n));
                }
                let mut lits: Vec<i64> = vars.into_iter().map(|v| if rng.random::<bool>() { v as i64 } else { -(v as i64) }).collect();
                let satisfied = |l: &i64| (planted >> (n - l.unsigned_abs() as usize) & 1 == 1) == (*l > 0);
                if !lits.iter().any(satisfied) {
                    let i = rng.random_range(0..lits.len());
                    lits[i] = -lits[i];
                }
                lits
            })
            .collect();
        let f = CnfFormula::new(n, clauses).expect("valid by construction");
        if f.models() == [planted] {
            return Some(f);
        }
    }
    None
}
