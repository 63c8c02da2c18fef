//! Search with several marked elements: the known-count algorithm with
//! amplified repetition, and the unknown-count sweep.

use searchkit::gf2::trial_rng;
use searchkit::multipoint::{k_for_count, multi_point_amplified, multi_point_unknown, CostCache, MultipointOptions};
use searchkit::sim::PhaseOracleSpec;

fn main() {
    let marked = [17u64, 300, 301, 999, 1500];
    let oracle = PhaseOracleSpec::from_marked(11, marked);
    let opts = MultipointOptions::default();

    let k = k_for_count(marked.len());
    let mut log = Vec::new();
    let found = multi_point_amplified(&oracle, k, 0.9, &opts, &mut CostCache::default(), &mut trial_rng(1, 0), &mut log)
        .unwrap();
    let queries: u64 = log.iter().map(|t| t.oracle_queries).sum();
    println!("known count, k = {k}: found {found:?} after {} trials and {queries} queries", log.len());
    for t in &log {
        println!("  {:?} d={:?} marked in kernel {:?} p={:.3}", t.kind, t.d, t.marked_in_kernel, t.success_probability);
    }

    let out = multi_point_unknown(&oracle, 0.3, &opts, 5).unwrap();
    println!(
        "unknown count: found {:?}, {} trials, {} queries, {} non-oracle basic gates",
        out.found, out.telemetry.trials, out.telemetry.oracle_queries, out.telemetry.non_oracle_basic_gates
    );
}
