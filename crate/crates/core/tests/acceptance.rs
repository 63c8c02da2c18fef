//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::RngExt;
use rayon::prelude::*;

use searchkit::circuit::{depends_on, depends_on_any, eval_classical, qubit_range, BasisState, Circuit, Gate, Qubit};
use searchkit::gf2::{
    all_hashes, brute_force_pairwise, exact_kernel_dim_distribution, kernel_dim_distribution,
    pairwise_independence_check, trial_rng, unique_intersection_count, HashFamily,
};
use searchkit::multipoint::{
    k_for_count, multi_point, multi_point_unknown, multi_point_with_hash, CostCache, MultipointOptions,
};
use searchkit::sat::{compile_oracle, dependency_profile, random_unique_formula, solve_unique_sat, CnfFormula, SolveOptions};
use searchkit::search::{
    bench_row, build_d, build_single_point, build_w, schedule_from_x, single_point, DiffuserSchedule,
    SinglePointOptions,
};
use searchkit::sim::{unitary_equiv, EquivDomain, EquivOptions, OracleBindings, PhaseOracleSpec, Statevector};
use searchkit::stats::{wilson_interval, Z99};
use searchkit::uncompute::{rewrite, w_as_generic, Factor, GenericOracleCircuit};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, || format!("took {t:.1?}, limit {limit:?}"))
}

fn satisfies(f: &CnfFormula, x: u64) -> bool {
    let n = f.num_vars();
    f.clauses().iter().all(|c| c.iter().any(|l| ((x >> (n - l.var())) & 1 == 1) == l.positive()))
}

fn ceil_log2(v: usize) -> usize {
    (0..).find(|&e| 1usize << e >= v).unwrap()
}

fn random_schedule(rng: &mut impl RngExt, max_total: usize) -> DiffuserSchedule {
    let n = rng.random_range(1..=max_total);
    let mut ks = Vec::new();
    let mut left = n;
    while left > 0 {
        let k = rng.random_range(1..=left);
        ks.push(k);
        left -= k;
    }
    DiffuserSchedule::new(ks).unwrap()
}

fn certainty() -> Check {
    let start = Instant::now();
    let cases: Vec<(usize, usize, u64)> = [4usize, 8, 12]
        .into_iter()
        .flat_map(|n| {
            let targets: Vec<u64> = if n == 4 {
                (0..16).collect()
            } else {
                let mut rng = trial_rng(1, n as u64);
                sample(&mut rng, 1 << n, 16).into_iter().map(|t| t as u64).collect()
            };
            [1usize, 2].into_iter().flat_map(move |x| targets.clone().into_iter().map(move |t| (n, x, t)))
        })
        .collect();
    let worst = cases
        .par_iter()
        .map(|&(n, x, t)| {
            let r = single_point(&PhaseOracleSpec::single(n, t), &SinglePointOptions { x, ..Default::default() })
                .map_err(|e| format!("n={n} x={x} target={t}: {e}"))?;
            ensure(r.found == Some(t), || format!("n={n} x={x}: found {:?}, wanted {t}", r.found))?;
            Ok(r.success_probability.unwrap())
        })
        .collect::<Result<Vec<f64>, String>>()?
        .into_iter()
        .fold(1.0, f64::min);
    ensure(worst >= 1.0 - 1e-9, || format!("minimum success {worst}"))?;
    within(start, Duration::from_secs(120))?;
    Ok(format!("{} searches, minimum success probability 1 - {:.1e}", cases.len(), 1.0 - worst))
}

fn recurrence_fidelity() -> Check {
    let start = Instant::now();
    let mut rng = trial_rng(2, 0);
    let schedules: Vec<(DiffuserSchedule, u64)> = (0..200)
        .map(|_| {
            let s = random_schedule(&mut rng, 12);
            let t = rng.random_range(0..1u64 << s.n());
            (s, t)
        })
        .collect();
    let worst = schedules
        .par_iter()
        .map(|(s, t)| {
            let n = s.n();
            // closed forms, computed independently of the library
            let mut alpha = 1.0;
            let mut beta = 1.0;
            let mut covered = 0;
            for &k in s.ks() {
                covered += k;
                let p = 0.5f64.powi(k as i32);
                alpha *= p.sqrt() * (3.0 - 4.0 * p);
                beta = 0.5f64.powf(covered as f64 / 2.0) * (1.0 - 2.0 * p) + p.sqrt() * (2.0 - 2.0 * p) * beta;
            }
            let bindings = OracleBindings::new().with("O", PhaseOracleSpec::single(n, *t));
            let mut errs = [0.0; 2];
            for (i, (circuit, expect)) in [(build_w(s, "O"), alpha), (build_d(s, "O"), beta)].into_iter().enumerate() {
                let mut state = Statevector::zero_state(n).unwrap();
                let mut h = Circuit::new(n, 0);
                h.extend(qubit_range(0, n).into_iter().map(Gate::H));
                h.append(&circuit);
                state.apply_circuit(&h, &bindings).unwrap();
                errs[i] = (state.amplitude_at(*t as usize).norm() - expect).abs();
            }
            errs
        })
        .reduce(|| [0.0; 2], |a, b| [a[0].max(b[0]), a[1].max(b[1])]);
    ensure(worst[0] <= 1e-12 && worst[1] <= 1e-12, || format!("max errors {:e} (nested), {:e} (tree)", worst[0], worst[1]))?;
    within(start, Duration::from_secs(300))?;
    Ok(format!("200 schedules, max error {:.1e} nested, {:.1e} tree", worst[0], worst[1]))
}

fn query_accounting() -> Check {
    let cases: Vec<(usize, usize)> = (2..=16).flat_map(|n| (1..=4).map(move |x| (n, x))).collect();
    let rows = cases
        .par_iter()
        .map(|&(n, x)| {
            let s = schedule_from_x(n, x).map_err(|e| e.to_string())?;
            let m = s.m() as u32;
            let w = build_w(&s, "O").oracle_calls();
            ensure(w == (3usize.pow(m) - 1) / 2, || format!("n={n} x={x}: W has {w} calls, m={m}"))?;
            let sp = build_single_point(&PhaseOracleSpec::single(n, 0), &SinglePointOptions { x, ..Default::default() })
                .map_err(|e| e.to_string())?;
            let total = sp.circuit.oracle_calls();
            ensure(total == sp.plan.total_oracle_calls, || format!("n={n} x={x}: plan {} vs circuit {total}", sp.plan.total_oracle_calls))?;
            let q = 0.5f64.powi(x as i32);
            let bound = PI / 4.0 / (1.0 - q - q * q) * 2f64.powf(n as f64 / 2.0) + 2.0 * 3f64.powi(m as i32) - 2.0;
            ensure(total as f64 <= bound, || format!("n={n} x={x}: {total} queries > bound {bound:.2}"))?;
            Ok(bound - total as f64)
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let slack = rows.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("{} (n, x) pairs, n = 2..16, x = 1..4; smallest slack below the bound {slack:.2}", rows.len()))
}

fn random_body(rng: &mut impl RngExt, n: usize, support: &[Qubit]) -> Circuit {
    let mut body = Circuit::new(n, 0);
    for _ in 0..rng.random_range(0..=3) {
        let q = support[rng.random_range(0..support.len())];
        let gate = match rng.random_range(0..5) {
            0 => Gate::H(q),
            1 => Gate::X(q),
            2 => Gate::ry(q, rng.random::<f64>() * 3.0),
            3 if support.len() > 1 => {
                let r = *support.iter().find(|r| **r != q).unwrap();
                Gate::cx(q, r)
            }
            _ => Gate::Diffuser(support.to_vec()),
        };
        body.push(gate);
    }
    body
}

fn random_formula(rng: &mut impl RngExt, n: usize) -> CnfFormula {
    let c = rng.random_range(1..=3);
    let clauses = (0..c)
        .map(|_| {
            let w = rng.random_range(1..=n.min(2));
            let vars: BTreeSet<usize> = std::iter::repeat_with(|| rng.random_range(1..=n)).take(w).collect();
            vars.into_iter().map(|v| if rng.random::<bool>() { v as i64 } else { -(v as i64) }).collect()
        })
        .collect();
    CnfFormula::new(n, clauses).unwrap()
}

fn rewrite_soundness() -> Check {
    let start = Instant::now();
    let mut rng = trial_rng(4, 0);
    let mut corpus = Vec::new();
    while corpus.len() < 60 {
        let n = rng.random_range(2..=3);
        let f = random_formula(&mut rng, n);
        let compiled = compile_oracle(&f);
        if n + compiled.decomposition.num_ancilla() > 12 {
            continue;
        }
        let v = if corpus.len() % 3 == 0 {
            w_as_generic(&random_schedule(&mut rng, n), "O")
        } else {
            let factors = (0..rng.random_range(1..=4))
                .map(|_| {
                    let size = rng.random_range(1..=n);
                    let support: Vec<Qubit> = sample(&mut rng, n, size).into_iter().map(Qubit).collect();
                    let body = random_body(&mut rng, n, &support);
                    Factor { support, body }
                })
                .collect();
            GenericOracleCircuit::new(n, "O", factors).unwrap()
        };
        if v.num_main() != n {
            continue;
        }
        corpus.push((f, compiled.decomposition, v));
    }
    let checked = corpus
        .par_iter()
        .map(|(f, dec, v)| {
            let (vt, report) = rewrite(v, dec).map_err(|e| e.to_string())?;
            let formula = f.clone();
            let spec = PhaseOracleSpec::from_predicate(f.num_vars(), move |x| satisfies(&formula, x));
            let bindings = OracleBindings::new().with("O", spec);
            let opts = EquivOptions { tol: 1e-9, domain: EquivDomain::ZeroAncilla, ..Default::default() };
            let eq = unitary_equiv(&vt, &v.expand(), &bindings, opts).map_err(|e| e.to_string())?;
            ensure(eq.equivalent && eq.exhaustive, || format!("{f}: deviation {:e}", eq.max_deviation))?;
            let u = dec.uncompute();
            let dbar: usize = v.factors().iter().map(|fac| depends_on_any(u, &fac.support).len()).sum();
            let expected = 2 * u.len() + v.ell() * dec.phase().len() + 2 * dbar;
            let bodies: usize = v.factors().iter().map(|fac| fac.body.len()).sum();
            ensure(report.total_oracle_gates == expected, || format!("{f}: accounting {} vs {expected}", report.total_oracle_gates))?;
            ensure(vt.len() - bodies == expected, || format!("{f}: emitted {} vs {expected}", vt.len() - bodies))?;
            Ok(eq.max_deviation)
        })
        .collect::<Result<Vec<f64>, String>>()?;
    within(start, Duration::from_secs(600))?;
    let dev = checked.iter().copied().fold(0.0, f64::max);
    Ok(format!("{} circuits, max deviation {dev:.1e}, gate totals exact", checked.len()))
}

fn hash_exactness() -> Check {
    let mut pairs = 0;
    for n in 1..=15 {
        for k in 1..=15 {
            if k * n + k > 16 {
                continue;
            }
            let exact = pairwise_independence_check(n, k).map_err(|e| e.to_string())?;
            ensure(exact, || format!("H_{{{n},{k}}} is not pairwise independent"))?;
            if k * n + k <= 10 {
                ensure(brute_force_pairwise(n, k, HashFamily::Affine), || format!("enumeration disagrees at ({n},{k})"))?;
            }
            pairs += 1;
        }
    }
    ensure(!brute_force_pairwise(2, 1, HashFamily::Linear), || "linear family passed".into())?;
    let n = 4;
    let mut rng = trial_rng(5, 0);
    let mut worst = 1.0f64;
    let mut checked = 0;
    for big_k in 1..=16usize {
        let mut sets: Vec<Vec<u64>> = vec![(0..big_k as u64).collect()];
        sets.extend((0..6).map(|_| sample(&mut rng, 16, big_k).into_iter().map(|x| x as u64).collect()));
        for k in (1..=n + 2).filter(|&k| 1usize << k <= 4 * big_k && big_k <= 1 << (k - 1)) {
            for set in &sets {
                let (hits, total) = unique_intersection_count(n, k, set);
                if k <= 3 {
                    let direct = all_hashes(n, k)
                        .filter(|h| set.iter().filter(|&&x| h.eval(x) == 0).count() == 1)
                        .count() as u128;
                    ensure(direct == hits, || format!("K={big_k} k={k}: {direct} vs {hits}"))?;
                }
                ensure(8 * hits >= total, || format!("K={big_k} k={k} {set:?}: {hits}/{total} < 1/8"))?;
                worst = worst.min(hits as f64 / total as f64);
                checked += 1;
            }
        }
    }
    Ok(format!("{pairs} (n,k) pairs exactly pairwise independent; {checked} (K, k, set) cases, min unique-intersection probability {worst:.4}"))
}

fn kernel_tail() -> Check {
    let start = Instant::now();
    let n = 10;
    let mut parts = Vec::new();
    for k in 3..=7 {
        let dist = kernel_dim_distribution(n, k, 100_000, 6).map_err(|e| e.to_string())?;
        let d = n - k + 2;
        let freq = dist.at_least(d) as f64 / dist.trials as f64;
        let ci = dist.tail_interval(d);
        ensure(ci.low <= 1.0 / 16.0, || format!("k={k}: P(d ≥ {d}) = {freq} with interval {ci:?}"))?;
        let exact: f64 = exact_kernel_dim_distribution(n, k).iter().filter(|(dim, _)| dim.is_some_and(|x| x >= d)).map(|(_, p)| p).sum();
        ensure(exact <= 1.0 / 16.0, || format!("k={k}: exact tail {exact}"))?;
        parts.push(format!("k={k}: {freq:.4}"));
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("P(d ≥ n-k+2) at n=10: {}", parts.join(", ")))
}

fn multipoint_success() -> Check {
    let opts = MultipointOptions::default();
    let n = 4;
    let mut worst4 = 1.0f64;
    for big_k in [1usize, 2, 3, 5, 8] {
        let k = k_for_count(big_k);
        let mut rng = trial_rng(7, big_k as u64);
        let sets: Vec<Vec<u64>> = if big_k == 1 {
            (0..16).map(|t| vec![t]).collect()
        } else {
            (0..8).map(|_| sample(&mut rng, 16, big_k).into_iter().map(|x| x as u64).collect()).collect()
        };
        for set in sets {
            let oracle = PhaseOracleSpec::from_marked(n, set.clone());
            let p = if k + 2 >= n {
                let t = multi_point(&oracle, k, &opts, &mut CostCache::default(), &mut rng).map_err(|e| e.to_string())?;
                t.success_probability
            } else {
                let mut cache = CostCache::default();
                let hashes: Vec<_> = all_hashes(n, k).collect();
                let mut total = 0.0;
                for h in &hashes {
                    let t = multi_point_with_hash(&oracle, k, h, &opts, &mut cache, &mut rng).map_err(|e| e.to_string())?;
                    total += t.success_probability;
                }
                total / hashes.len() as f64
            };
            ensure(p >= 1.0 / 16.0, || format!("n=4 {set:?}: success {p}"))?;
            worst4 = worst4.min(p);
        }
    }
    let n = 10;
    let mut parts = Vec::new();
    for big_k in [1usize, 2, 3, 5, 8] {
        let k = k_for_count(big_k);
        let marked: Vec<u64> =
            sample(&mut trial_rng(8, big_k as u64), 1 << n, big_k).into_iter().map(|x| x as u64).collect();
        let oracle = PhaseOracleSpec::from_marked(n, marked);
        let successes: u64 = (0..1000u64)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(9 + big_k as u64, t);
                let r = multi_point(&oracle, k, &opts, &mut CostCache::default(), &mut rng).unwrap();
                u64::from(r.found.is_some())
            })
            .sum();
        let ci = wilson_interval(successes, 1000, Z99);
        ensure(ci.high >= 1.0 / 16.0, || format!("n=10 K={big_k}: {successes}/1000 successes"))?;
        parts.push(format!("K={big_k}: {:.3}", successes as f64 / 1000.0));
    }
    Ok(format!("n=4 exact minimum {worst4:.4}; n=10 empirical {}", parts.join(", ")))
}

fn unknown_scaling() -> Check {
    let n = 12;
    let mut means = Vec::new();
    for big_k in [1usize, 4, 16, 64] {
        let marked: Vec<u64> =
            sample(&mut trial_rng(10, big_k as u64), 1 << n, big_k).into_iter().map(|x| x as u64).collect();
        let oracle = PhaseOracleSpec::from_marked(n, marked);
        let total: u64 = (0..200u64)
            .into_par_iter()
            .map(|run| {
                let out = multi_point_unknown(&oracle, 0.3, &MultipointOptions::default(), 1000 * big_k as u64 + run).unwrap();
                if let Some(x) = out.found {
                    assert!(oracle.is_marked(x));
                }
                out.telemetry.oracle_queries
            })
            .sum();
        means.push((big_k, total as f64 / 200.0));
    }
    ensure(means.windows(2).all(|w| w[1].1 < w[0].1), || format!("means not decreasing: {means:?}"))?;
    let ratios: Vec<f64> = means.iter().map(|(k, m)| m / (4096.0 / *k as f64).sqrt()).collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(spread <= 4.0, || format!("ratios {ratios:?} spread {spread}"))?;
    let shown: Vec<String> = means.iter().zip(&ratios).map(|((k, m), r)| format!("K={k}: {m:.1} ({r:.2})")).collect();
    Ok(format!("mean queries (÷√(N/K)) {}; spread {spread:.2}", shown.join(", ")))
}

fn ksat_validity() -> Check {
    let mut rng = trial_rng(11, 0);
    let mut formulas = Vec::new();
    while formulas.len() < 100 {
        let n = rng.random_range(2..=8);
        let c = rng.random_range(n.min(8)..=8);
        if let Some(f) = random_unique_formula(n, c, 3, &mut rng) {
            formulas.push(f);
        }
    }
    let averages = formulas
        .par_iter()
        .map(|f| {
            let n = f.num_vars();
            let (w, c) = (f.width(), f.num_clauses());
            let models: Vec<u64> = (0..1u64 << n).filter(|&x| satisfies(f, x)).collect();
            ensure(models.len() == 1, || format!("{f}: {} models", models.len()))?;
            let compiled = compile_oracle(f);
            let dec = &compiled.decomposition;
            let full = dec.as_circuit();
            for x in 0..1u64 << n {
                let input = BasisState::from_prefix(full.num_qubits(), n, x);
                let (out, negated) = eval_classical(&full, &input).ok_or("not classical")?;
                ensure(out == input, || format!("{f}: ancillas not restored on {x:b}"))?;
                ensure(negated == satisfies(f, x), || format!("{f}: wrong phase on {x:b}"))?;
            }
            ensure(dec.d_u() < 3 * w * c + 2 * c, || format!("{f}: D_u = {}", dec.d_u()))?;
            ensure(dec.d_p() == 1, || format!("{f}: D_p = {}", dec.d_p()))?;
            let profile = dependency_profile(f, &compiled);
            for v in 1..=n {
                let dv = depends_on(dec.uncompute(), Qubit(v - 1)).len();
                let bound = f.occurrences(v) * (4 + ceil_log2(w) + ceil_log2(c));
                ensure(dv == profile.per_variable[v - 1], || format!("{f}: profile disagrees at x{v}"))?;
                ensure(dv <= bound, || format!("{f}: D_{v} = {dv} > {bound}"))?;
            }
            let r = solve_unique_sat(f, &SolveOptions::default()).map_err(|e| format!("{f}: {e}"))?;
            ensure(r.assignment == models[0], || format!("{f}: solved {:b}, model {:b}", r.assignment, models[0]))?;
            ensure(r.success_probability >= 1.0 - 1e-9, || format!("{f}: success {}", r.success_probability))?;
            Ok(r.average_exact / r.average_unrewritten)
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let mean = averages.iter().sum::<f64>() / averages.len() as f64;
    Ok(format!("100 unique formulas (n ≤ 8, c ≤ 8, W ≤ 3) compiled, bounded and solved; rewritten/unrewritten gates per query {mean:.3} on average"))
}

fn optimal_reference() -> Check {
    let mut parts = Vec::new();
    for n in 8..=14 {
        let row = bench_row(n, 4).map_err(|e| e.to_string())?;
        let reference = (PI / 4.0 * 2f64.powf(n as f64 / 2.0)).ceil() as u64;
        ensure(row.reference == reference, || format!("n={n}: reference {} vs {reference}", row.reference))?;
        ensure(row.oracle_queries as f64 <= 1.12 * reference as f64, || format!("n={n}: {} queries vs {reference}", row.oracle_queries))?;
        parts.push(format!("{}/{}", row.oracle_queries, reference));
    }
    Ok(format!("x=4, n=8..14 queries/reference: {}", parts.join(" ")))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("certainty of search", certainty),
        ("recurrence fidelity", recurrence_fidelity),
        ("query accounting", query_accounting),
        ("rewrite soundness and exactness", rewrite_soundness),
        ("hash family exactness", hash_exactness),
        ("kernel-dimension tail", kernel_tail),
        ("multi-point success", multipoint_success),
        ("unknown-count scaling", unknown_scaling),
        ("k-SAT oracle validity", ksat_validity),
        ("optimal-query reference", optimal_reference),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
