//! Compiles a uniquely satisfiable formula into an oracle and finds its
//! model with certainty.

use searchkit::gf2::trial_rng;
use searchkit::sat::{compile_oracle, dependency_profile, random_unique_formula, solve_unique_sat, SolveOptions};

fn main() {
    let f = random_unique_formula(8, 10, 3, &mut trial_rng(31, 0)).expect("a unique formula");
    println!("{f}");
    let compiled = compile_oracle(&f);
    let profile = dependency_profile(&f, &compiled);
    println!("D_u = {} (bound {})", compiled.decomposition.d_u(), searchkit::sat::uncompute_gate_bound(&f));
    println!("dependent gates per variable: {:?}", profile.per_variable);
    println!("bounds:                       {:?}", profile.bounds);

    let r = solve_unique_sat(&f, &SolveOptions::default()).unwrap();
    println!("model x1..x8 = {} with p = {:.12}", r.bits, r.success_probability);
    println!("{} queries on {} qubits, {} gates", r.oracle_queries, r.qubits, r.gates);
    println!(
        "oracle gates per query: {:.2} rewritten, {:.2} weighted bound, {:.2} uniform bound, {:.0} unrewritten",
        r.average_exact, r.average_weighted, r.average_uniform, r.average_unrewritten
    );
}
