//! Rewrites the nested search over a compiled CNF oracle so that only the
//! oracle gates feeding each diffuser are undone, and checks the result.

use searchkit::circuit::{qubit_range, Gate};
use searchkit::sat::{compile_oracle, parse_dimacs};
use searchkit::search::DiffuserSchedule;
use searchkit::sim::{unitary_equiv, EquivDomain, EquivOptions, OracleBindings};
use searchkit::uncompute::{average_per_query, rewrite, w_as_generic, AverageMode};

fn main() {
    let f = parse_dimacs("p cnf 3 2\n1 2 0\n-1 3 0\n").unwrap();
    let dec = compile_oracle(&f).decomposition;
    let schedule: DiffuserSchedule = "1,2".parse().unwrap();
    let v = w_as_generic(&schedule, "O");
    let (rewritten, report) = rewrite(&v, &dec).unwrap();
    println!("{f}");
    println!("D_u = {}, D_p = {}, {} queries", report.d_u, report.d_p, report.ell);
    println!("dependent gates per factor: {:?}", report.dependent_gates);
    println!("oracle-derived gates: {} (expected {})", report.emitted_oracle_gates, report.total_oracle_gates);
    for mode in [AverageMode::Exact, AverageMode::Weighted, AverageMode::Uniform] {
        println!("{mode:?} average per query: {:.3}", average_per_query(&report, mode));
    }
    println!("without the rewrite: {}", 2 * dec.d_u() + dec.d_p());

    let bindings = OracleBindings::new().with("O", f.oracle_spec());
    let opts = EquivOptions { domain: EquivDomain::ZeroAncilla, ..Default::default() };
    let eq = unitary_equiv(&rewritten, &v.expand(), &bindings, opts).unwrap();
    println!("equivalent on clean ancillas: {} (max deviation {:e})", eq.equivalent, eq.max_deviation);
    let oracle_gates = rewritten.gates().iter().filter(|g| !matches!(g, Gate::Diffuser(_))).count();
    println!("{} qubits ({} main), {oracle_gates} non-diffuser gates", rewritten.num_qubits(), qubit_range(0, 3).len());
}
