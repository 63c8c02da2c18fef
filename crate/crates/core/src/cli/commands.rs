use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{config_err, BenchMode, CliError, Command, CommonArgs, NRange, Output};
use crate::circuit::{count_gates, decompose_to_basic, AncillaPolicy, eval_classical, parse_json, qubit_range, to_json, to_qasm, to_text, BasisState, CountLevel};
use crate::gf2::trial_rng;
use crate::multipoint::{
    multi_point_amplified, multi_point_unknown, trials_csv, CostCache, MultipointOptions, SearchTelemetry, TrialRecord,
};
use crate::sat::{
    compile_oracle, dependency_profile, parse_dimacs, random_unique_formula, solve_unique_sat, uncompute_gate_bound,
    CnfFormula, OracleManifest, SolveOptions,
};
use crate::search::{
    bench_row, build_single_point, schedule_from_x, simulated_trace, DiffuserSchedule, Family, SinglePointOptions,
    ORACLE_TAG,
};
use crate::sim::{unitary_equiv, write_dump, EquivDomain, EquivOptions, OracleBindings, PhaseOracleSpec};
use crate::uncompute::{
    average_per_query, rewrite, w_as_generic, AverageMode, DecompositionManifest, RewriteReport,
    UncomputableDecomposition,
};

pub(super) fn dispatch(command: Command, out: Output) -> Result<PathBuf, CliError> {
    match command {
        Command::Generate { common, family, pipeline } => generate(&common, family, pipeline, out),
        Command::Simulate { common, family, dump } => simulate(&common, family, dump, out),
        Command::Recurrence { common } => recurrence(&common, out),
        Command::UncomputeRewrite { common, oracle_circuit, manifest } => {
            uncompute_rewrite(&common, oracle_circuit.as_deref().zip(manifest.as_deref()), out)
        }
        Command::Multipoint { common, marked_count } => multipoint(&common, marked_count, out),
        Command::Ksat { common, clauses, width, compile_only, no_relabel } => {
            ksat(&common, clauses, width, compile_only, !no_relabel, out)
        }
        Command::Bench { common, mode, n_range } => bench(&common, mode, &n_range, out),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_cnf(path: &Path) -> Result<CnfFormula, CliError> {
    parse_dimacs(&read(path)?).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Register width from whichever of `--n`, `--schedule` and `implied` are
/// present; they must agree.
fn resolve_n(common: &CommonArgs, implied: Option<usize>) -> Result<usize, CliError> {
    let candidates: Vec<(&str, usize)> = [
        ("--n", common.n),
        ("--schedule", common.schedule.as_ref().map(DiffuserSchedule::n)),
        ("oracle", implied),
    ]
    .into_iter()
    .filter_map(|(name, v)| v.map(|v| (name, v)))
    .collect();
    match candidates.as_slice() {
        [] => Err(config_err("the register width is unknown; pass --n")),
        [(_, n), rest @ ..] => match rest.iter().find(|(_, m)| m != n) {
            Some((name, m)) => Err(config_err(format!("{} gives n = {n} but {name} gives n = {m}", candidates[0].0))),
            None if *n == 0 => Err(config_err("n must be at least 1")),
            None => Ok(*n),
        },
    }
}

fn resolve_schedule(common: &CommonArgs, n: usize) -> Result<DiffuserSchedule, CliError> {
    match (&common.schedule, common.x) {
        (Some(_), Some(_)) => Err(config_err("--x and --schedule are mutually exclusive")),
        (Some(s), None) => Ok(s.clone()),
        (None, x) => schedule_from_x(n, x.unwrap_or(1)).map_err(config_err),
    }
}

fn search_options(common: &CommonArgs, family: Family) -> SinglePointOptions {
    SinglePointOptions { x: common.x.unwrap_or(1), schedule: common.schedule.clone(), family }
}

fn resolve_seed(common: &CommonArgs) -> u64 {
    common.seed.unwrap_or_else(|| {
        let seed = rand::rng().next_u64();
        eprintln!("seed: {seed} (generated; pass --seed {seed} to replay)");
        seed
    })
}

fn marked_spec(n: usize, marked: &[u64]) -> Result<PhaseOracleSpec, CliError> {
    if n > 63 {
        return Err(config_err(format!("n = {n} is too wide for an explicit marked set")));
    }
    if let Some(x) = marked.iter().find(|&&x| x >> n != 0) {
        return Err(config_err(format!("marked element {x} does not fit in {n} qubits")));
    }
    Ok(PhaseOracleSpec::from_marked(n, marked.iter().copied()))
}

enum OracleSource {
    Marked(Vec<u64>),
    Cnf(CnfFormula),
    Random(usize),
}

fn oracle_source(common: &CommonArgs, random: Option<usize>) -> Result<Option<OracleSource>, CliError> {
    let mut sources = Vec::new();
    if let Some(m) = &common.oracle_marked {
        sources.push(OracleSource::Marked(m.clone()));
    }
    if let Some(path) = &common.cnf {
        sources.push(OracleSource::Cnf(load_cnf(path)?));
    }
    if let Some(k) = random {
        sources.push(OracleSource::Random(k));
    }
    if sources.len() > 1 {
        return Err(config_err("give at most one oracle source (--oracle-marked, --cnf, --marked-count)"));
    }
    Ok(sources.pop())
}

/// An oracle fixed by flags, defaulting to the single element 0.
fn fixed_oracle(common: &CommonArgs) -> Result<PhaseOracleSpec, CliError> {
    match oracle_source(common, None)? {
        Some(OracleSource::Cnf(f)) => {
            resolve_n(common, Some(f.num_vars()))?;
            Ok(f.oracle_spec())
        }
        Some(OracleSource::Marked(m)) => marked_spec(resolve_n(common, None)?, &m),
        Some(OracleSource::Random(_)) => unreachable!(),
        None => marked_spec(resolve_n(common, None)?, &[0]),
    }
}

#[derive(Serialize)]
struct GenerateResult {
    n: usize,
    schedule: DiffuserSchedule,
    family: Family,
    pipeline: bool,
    oracle_calls: usize,
    expected_oracle_calls: usize,
    logical_gates: usize,
    basic_gates: usize,
    qubits: usize,
}

fn generate(common: &CommonArgs, family: Family, pipeline: bool, mut out: Output) -> Result<PathBuf, CliError> {
    let n = resolve_n(common, None)?;
    let schedule = resolve_schedule(common, n)?;
    let (circuit, expected) = if pipeline {
        let spec = marked_spec(n, &[0])?;
        let opts = SinglePointOptions { x: 1, schedule: Some(schedule.clone()), family };
        let sp = build_single_point(&spec, &opts).map_err(config_err)?;
        (sp.circuit, sp.plan.total_oracle_calls)
    } else {
        (family.build(&schedule, ORACLE_TAG), family.oracle_calls(schedule.m()))
    };
    out.write("circuit.txt", to_text(&circuit))?;
    out.write("circuit.json", to_json(&circuit))?;
    let counts = count_gates(&circuit, CountLevel::Logical);
    let result = GenerateResult {
        n,
        schedule: schedule.clone(),
        family,
        pipeline,
        oracle_calls: counts.oracle_calls,
        expected_oracle_calls: expected,
        logical_gates: counts.total,
        basic_gates: counts.basic_equivalent,
        qubits: circuit.num_qubits(),
    };
    println!("{family:?} circuit for schedule {schedule}: {} oracle calls, {} gates", result.oracle_calls, result.logical_gates);
    if result.oracle_calls != expected {
        return Err(CliError::Check(format!("{} oracle calls, expected {expected}", result.oracle_calls)));
    }
    out.finish(result)
}

#[derive(Serialize)]
struct SimulateResult {
    marked_count: u64,
    success_probability: f64,
    found: u64,
    found_is_marked: bool,
    report: crate::search::SinglePointReport,
}

fn simulate(common: &CommonArgs, family: Family, dump: bool, mut out: Output) -> Result<PathBuf, CliError> {
    let spec = fixed_oracle(common)?;
    let n = spec.num_qubits();
    let opts = search_options(common, family);
    resolve_schedule(common, n)?;
    let sp = build_single_point(&spec, &opts).map_err(config_err)?;
    let state = sp.simulate().map_err(config_err)?;
    let p = sp.success_probability(&state, &spec);
    let marginal = state.marginal(&qubit_range(0, n));
    let found = marginal.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i as u64).unwrap_or(0);

    let mut csv = String::from("index,bits,probability\n");
    for (i, q) in marginal.iter().enumerate() {
        writeln!(csv, "{i},{i:0n$b},{q}").unwrap();
    }
    out.write("probabilities.csv", csv)?;

    let marked: Vec<u64> = spec.marked_elements();
    let recurrence = family.trace(&sp.schedule);
    let simulated = match marked.as_slice() {
        [target] => Some(simulated_trace(family, &sp.schedule, *target).map_err(config_err)?),
        _ => None,
    };
    let mut trace = String::from("level,block,recurrence,simulated\n");
    for (j, amp) in recurrence.0.iter().enumerate() {
        let block = if j == 0 { 0 } else { sp.schedule.ks()[j - 1] };
        let sim = simulated.as_ref().map(|s| s.0[j].to_string()).unwrap_or_default();
        writeln!(trace, "{j},{block},{amp},{sim}").unwrap();
    }
    out.write("trace.csv", trace)?;
    if dump {
        write_dump(&state, &out.dir().join("state")).map_err(|source| CliError::Io { path: out.dir().join("state"), source })?;
        out.track("state.bin");
        out.track("state.json");
    }

    let mut report = sp.report();
    report.success_probability = Some(p);
    report.found = Some(found);
    let result =
        SimulateResult { marked_count: marked.len() as u64, success_probability: p, found, found_is_marked: spec.is_marked(found), report };
    println!("schedule {}: success probability {p:.12}, most likely outcome {found:0n$b}", sp.schedule);
    let tol = common.tol.unwrap_or(1e-9);
    if marked.len() == 1 && p < 1.0 - tol {
        return Err(CliError::Check(format!("success probability {p} below 1 − {tol}")));
    }
    out.finish(result)
}

#[derive(Serialize)]
struct RecurrenceResult {
    schedule: DiffuserSchedule,
    target: u64,
    max_nested_error: f64,
    max_tree_error: f64,
}

fn recurrence(common: &CommonArgs, mut out: Output) -> Result<PathBuf, CliError> {
    let n = resolve_n(common, None)?;
    let schedule = resolve_schedule(common, n)?;
    let target = match common.oracle_marked.as_deref() {
        None => 0,
        Some([t]) if t >> n == 0 => *t,
        Some(_) => return Err(config_err("recurrence needs exactly one marked element inside the register")),
    };
    if common.cnf.is_some() {
        return Err(config_err("recurrence takes a single marked element, not --cnf"));
    }
    let alpha = Family::Nested.trace(&schedule);
    let beta = Family::Tree.trace(&schedule);
    let alpha_sim = simulated_trace(Family::Nested, &schedule, target).map_err(config_err)?;
    let beta_sim = simulated_trace(Family::Tree, &schedule, target).map_err(config_err)?;
    let mut csv = String::from("level,block,alpha,alpha_simulated,alpha_error,beta,beta_simulated,beta_error\n");
    let (mut max_a, mut max_b) = (0f64, 0f64);
    for j in 0..alpha.0.len() {
        let block = if j == 0 { 0 } else { schedule.ks()[j - 1] };
        let ea = (alpha.0[j] - alpha_sim.0[j]).abs();
        let eb = (beta.0[j] - beta_sim.0[j]).abs();
        max_a = max_a.max(ea);
        max_b = max_b.max(eb);
        writeln!(csv, "{j},{block},{},{},{ea:e},{},{},{eb:e}", alpha.0[j], alpha_sim.0[j], beta.0[j], beta_sim.0[j]).unwrap();
    }
    out.write("recurrence.csv", csv)?;
    println!("schedule {schedule}: max |error| nested {max_a:e}, tree {max_b:e}");
    let tol = common.tol.unwrap_or(1e-12);
    if max_a > tol || max_b > tol {
        return Err(CliError::Check(format!("recurrence and simulation differ by {:e} > {tol:e}", max_a.max(max_b))));
    }
    out.finish(RecurrenceResult { schedule, target, max_nested_error: max_a, max_tree_error: max_b })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyManifest {
    Oracle(Box<OracleManifest>),
    Ranges(DecompositionManifest),
}

/// Phase oracle realized by a decomposition with clean ancillas.
fn spec_of(dec: &UncomputableDecomposition) -> PhaseOracleSpec {
    let circuit = dec.as_circuit();
    let n = dec.num_main();
    PhaseOracleSpec::from_predicate(n, move |x| {
        let input = BasisState::from_prefix(circuit.num_qubits(), n, x);
        eval_classical(&circuit, &input).map(|(_, negated)| negated).unwrap_or(false)
    })
}

#[derive(Serialize)]
struct RewriteResult {
    schedule: DiffuserSchedule,
    report: RewriteReport,
    average_exact: f64,
    average_weighted: f64,
    average_uniform: f64,
    average_unrewritten: f64,
    qubits: usize,
    gates: usize,
    /// `None` when the register is too wide for the check.
    equivalent: Option<bool>,
    max_deviation: Option<f64>,
}

fn uncompute_rewrite(common: &CommonArgs, files: Option<(&Path, &Path)>, mut out: Output) -> Result<PathBuf, CliError> {
    let dec = match (files, &common.cnf) {
        (Some(_), Some(_)) => return Err(config_err("--cnf and --manifest are mutually exclusive")),
        (None, None) => return Err(config_err("pass --cnf, or --oracle-circuit with --manifest")),
        (None, Some(path)) => compile_oracle(&load_cnf(path)?).decomposition,
        (Some((circuit, manifest)), None) => {
            let circuit = parse_json(&read(circuit)?).map_err(config_err)?;
            let ranges = match serde_json::from_str::<AnyManifest>(&read(manifest)?).map_err(config_err)? {
                AnyManifest::Oracle(m) => m.decomposition,
                AnyManifest::Ranges(r) => r,
            };
            ranges.extract(&circuit).map_err(config_err)?
        }
    };
    if common.oracle_marked.is_some() {
        return Err(config_err("uncompute-rewrite needs a decomposed oracle, not --oracle-marked"));
    }
    let n = resolve_n(common, Some(dec.num_main()))?;
    let schedule = resolve_schedule(common, n)?;
    let v = w_as_generic(&schedule, ORACLE_TAG);
    let (vt, report) = rewrite(&v, &dec).map_err(config_err)?;
    out.write("rewritten.txt", to_text(&vt))?;
    out.write("rewritten.json", to_json(&vt))?;

    let tol = common.tol.unwrap_or(1e-9);
    let (equivalent, max_deviation) = if vt.num_qubits() <= crate::sim::MAX_QUBITS.min(20) {
        let bindings = OracleBindings::new().with(ORACLE_TAG, spec_of(&dec));
        let opts = EquivOptions { tol, domain: EquivDomain::ZeroAncilla, ..Default::default() };
        let r = unitary_equiv(&vt, &v.expand(), &bindings, opts).map_err(config_err)?;
        (Some(r.equivalent), Some(r.max_deviation))
    } else {
        (None, None)
    };
    let result = RewriteResult {
        schedule,
        average_exact: average_per_query(&report, AverageMode::Exact),
        average_weighted: average_per_query(&report, AverageMode::Weighted),
        average_uniform: average_per_query(&report, AverageMode::Uniform),
        average_unrewritten: (2 * dec.d_u() + dec.d_p()) as f64,
        qubits: vt.num_qubits(),
        gates: vt.len(),
        equivalent,
        max_deviation,
        report,
    };
    println!(
        "{} queries: {} oracle-derived gates ({:.3} per query, {:.3} without the rewrite)",
        result.report.ell, result.report.emitted_oracle_gates, result.average_exact, result.average_unrewritten
    );
    if result.report.emitted_oracle_gates != result.report.total_oracle_gates {
        return Err(CliError::Check(format!(
            "emitted {} oracle-derived gates, accounting gives {}",
            result.report.emitted_oracle_gates, result.report.total_oracle_gates
        )));
    }
    if equivalent == Some(false) {
        return Err(CliError::Check(format!("rewritten circuit deviates by {:e}", max_deviation.unwrap_or(f64::NAN))));
    }
    out.finish(result)
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    found: Option<u64>,
    telemetry: SearchTelemetry,
}

#[derive(Serialize)]
struct MultipointResult {
    n: usize,
    marked_count: u64,
    marked: Option<Vec<u64>>,
    k: Option<usize>,
    p: f64,
    successes: usize,
    mean_oracle_queries: f64,
    runs: Vec<RunSummary>,
}

fn multipoint(common: &CommonArgs, marked_count: Option<usize>, mut out: Output) -> Result<PathBuf, CliError> {
    let seed = resolve_seed(common);
    out.set_seed(seed);
    let (spec, listed) = match oracle_source(common, marked_count)? {
        None => return Err(config_err("pass --oracle-marked, --cnf or --marked-count")),
        Some(OracleSource::Cnf(f)) => {
            resolve_n(common, Some(f.num_vars()))?;
            (f.oracle_spec(), None)
        }
        Some(OracleSource::Marked(m)) => (marked_spec(resolve_n(common, None)?, &m)?, Some(m)),
        Some(OracleSource::Random(count)) => {
            let n = resolve_n(common, None)?;
            if n > 24 || count == 0 || count > 1 << n {
                return Err(config_err(format!("cannot mark {count} of 2^{n} elements")));
            }
            let mut rng = trial_rng(seed, u64::MAX);
            let mut m: Vec<u64> = sample(&mut rng, 1 << n, count).into_iter().map(|x| x as u64).collect();
            m.sort_unstable();
            (marked_spec(n, &m)?, Some(m))
        }
    };
    let n = spec.num_qubits();
    if let Some(k) = common.k {
        if k == 0 || k > n + 2 {
            return Err(config_err(format!("--k must lie in 1..={}", n + 2)));
        }
    }
    let p = common.p.unwrap_or(0.5);
    if !(p > 0.0 && p < 1.0) {
        return Err(config_err(format!("--p must lie strictly between 0 and 1, found {p}")));
    }
    let runs = common.trials.unwrap_or(1);
    let opts = MultipointOptions { x: common.x.unwrap_or(1), ..Default::default() };

    let results: Vec<(Option<u64>, Vec<TrialRecord>, SearchTelemetry)> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = trial_rng(seed, run as u64);
            match common.k {
                Some(k) => {
                    let mut log = Vec::new();
                    let found =
                        multi_point_amplified(&spec, k, p, &opts, &mut CostCache::default(), &mut rng, &mut log)?;
                    let mut t = SearchTelemetry { seed, ..Default::default() };
                    for r in &log {
                        t.oracle_queries += r.oracle_queries;
                        t.non_oracle_basic_gates += r.non_oracle_basic_gates;
                        t.trials += 1;
                    }
                    Ok((found, log, t))
                }
                None => {
                    let o = multi_point_unknown(&spec, p, &opts, rng.next_u64())?;
                    Ok((o.found, o.trials, o.telemetry))
                }
            }
        })
        .collect::<Result<_, crate::multipoint::MultipointError>>()
        .map_err(config_err)?;

    out.write("trials.csv", trials_csv(results.iter().enumerate().map(|(i, r)| (i, r.1.as_slice()))))?;
    let successes = results.iter().filter(|r| r.0.is_some()).count();
    let mean = results.iter().map(|r| r.2.oracle_queries as f64).sum::<f64>() / runs.max(1) as f64;
    if let Some(bad) = results.iter().filter_map(|r| r.0).find(|x| !spec.is_marked(*x)) {
        return Err(CliError::Check(format!("returned element {bad} is not marked")));
    }
    println!("{successes}/{runs} runs found a marked element; mean oracle queries {mean:.1}");
    out.finish(MultipointResult {
        n,
        marked_count: spec.marked_count() as u64,
        marked: listed,
        k: common.k,
        p,
        successes,
        mean_oracle_queries: mean,
        runs: results
            .into_iter()
            .enumerate()
            .map(|(run, (found, _, telemetry))| RunSummary { run, found, telemetry })
            .collect(),
    })
}

#[derive(Serialize)]
struct KsatResult {
    formula: String,
    num_vars: usize,
    num_clauses: usize,
    width: usize,
    d_u: usize,
    d_u_bound: usize,
    dependency: crate::sat::DependencyProfile,
    models: Option<usize>,
    solution: Option<crate::sat::SatSolveReport>,
}

fn ksat(
    common: &CommonArgs,
    clauses: Option<usize>,
    width: usize,
    compile_only: bool,
    relabel: bool,
    mut out: Output,
) -> Result<PathBuf, CliError> {
    let f = match oracle_source(common, None)? {
        Some(OracleSource::Cnf(f)) => {
            resolve_n(common, Some(f.num_vars()))?;
            f
        }
        Some(_) => return Err(config_err("ksat takes --cnf or a random formula, not --oracle-marked")),
        None => {
            let n = resolve_n(common, None)?;
            let c = clauses.unwrap_or(2 * n);
            if n > 20 || c == 0 || width == 0 {
                return Err(config_err("random formulas need 1 ≤ n ≤ 20, --clauses ≥ 1 and --width ≥ 1"));
            }
            let seed = resolve_seed(common);
            out.set_seed(seed);
            let f = random_unique_formula(n, c, width, &mut trial_rng(seed, 0))
                .ok_or_else(|| config_err(format!("no unique formula found with n = {n}, c = {c}, width ≤ {width}")))?;
            out.write("formula.cnf", f.to_dimacs())?;
            f
        }
    };
    let compiled = compile_oracle(&f);
    let dec = &compiled.decomposition;
    let manifest = compiled.manifest(&f);
    out.write("oracle.json", to_json(&dec.as_circuit()))?;
    let basic = decompose_to_basic(&dec.as_circuit(), &AncillaPolicy::Allocate).map_err(config_err)?;
    out.write("oracle.qasm", to_qasm(&basic).map_err(config_err)?)?;
    out.write("manifest.json", serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    let profile = dependency_profile(&f, &compiled);
    let mut csv = String::from("variable,occurrences,dependent_gates,bound\n");
    for v in 1..=f.num_vars() {
        writeln!(csv, "{v},{},{},{}", f.occurrences(v), profile.per_variable[v - 1], profile.bounds[v - 1]).unwrap();
    }
    out.write("dependency.csv", csv)?;
    if dec.d_u() > uncompute_gate_bound(&f) || !profile.within_bounds() {
        return Err(CliError::Check("compiled oracle exceeds its gate or dependency bounds".into()));
    }
    dec.validate(&f.oracle_spec(), &OracleBindings::new())
        .map_err(|e| CliError::Check(format!("compiled oracle disagrees with the formula: {e}")))?;

    let models = (f.num_vars() <= 24).then(|| f.models().len());
    let solution = if compile_only {
        None
    } else {
        if let Some(m) = models.filter(|&m| m != 1) {
            return Err(CliError::Check(format!("formula has {m} satisfying assignments, not exactly one")));
        }
        let opts = SolveOptions { x: common.x.unwrap_or(1), schedule: common.schedule.clone(), relabel };
        resolve_schedule(common, f.num_vars())?;
        let r = solve_unique_sat(&f, &opts).map_err(|e| match e {
            crate::sat::SatError::NotUnique(_) => CliError::Check(e.to_string()),
            other => config_err(other),
        })?;
        println!("assignment x1..x{} = {} (success {:.12}, {} queries)", f.num_vars(), r.bits, r.success_probability, r.oracle_queries);
        Some(r)
    };
    println!("D_u = {} (bound {}), average D_v = {:.3}", dec.d_u(), manifest.d_u_bound, profile.average);
    out.finish(KsatResult {
        formula: f.to_string(),
        num_vars: f.num_vars(),
        num_clauses: f.num_clauses(),
        width: f.width(),
        d_u: dec.d_u(),
        d_u_bound: manifest.d_u_bound,
        dependency: profile,
        models,
        solution,
    })
}

fn bench(common: &CommonArgs, mode: BenchMode, range: &NRange, mut out: Output) -> Result<PathBuf, CliError> {
    if common.schedule.is_some() || common.n.is_some() {
        return Err(config_err("bench sweeps --n-range with schedules from --x"));
    }
    let x = common.x.unwrap_or(1);
    if *range.0.start() == 0 || *range.0.end() > 24 {
        return Err(config_err("--n-range must lie within 1..24"));
    }
    let ns: Vec<usize> = range.0.clone().collect();
    let rows = ns.par_iter().map(|&n| bench_row(n, x)).collect::<Result<Vec<_>, _>>().map_err(config_err)?;
    let mut csv = String::from("n,x,schedule,oracle_queries,reference,ratio,query_bound");
    if mode == BenchMode::Gates {
        csv.push_str(",non_oracle_basic_gates,gates_per_sqrt_n");
    }
    csv.push('\n');
    for r in &rows {
        write!(csv, "{},{},\"{}\",{},{},{},{}", r.n, r.x, r.schedule, r.oracle_queries, r.reference, r.ratio, r.query_bound).unwrap();
        if mode == BenchMode::Gates {
            write!(csv, ",{},{}", r.non_oracle_basic_gates, r.gates_per_sqrt_n).unwrap();
        }
        csv.push('\n');
    }
    out.write("bench.csv", &csv)?;
    print!("{csv}");
    if let Some(r) = rows.iter().find(|r| r.oracle_queries as f64 > r.query_bound) {
        return Err(CliError::Check(format!("n = {}: {} queries exceed the bound {}", r.n, r.oracle_queries, r.query_bound)));
    }
    out.finish(rows)
}
