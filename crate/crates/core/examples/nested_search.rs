//! Certainty search for one marked element with the nested and tree
//! families, compared with the optimal query count.

use searchkit::search::{optimal_query_reference, single_point, Family, SinglePointOptions};
use searchkit::sim::PhaseOracleSpec;

fn main() {
    let n = 10;
    let target = 0b10_1100_1001;
    let oracle = PhaseOracleSpec::single(n, target);
    for family in [Family::Nested, Family::Tree] {
        for x in [1, 2, 4] {
            let r = single_point(&oracle, &SinglePointOptions { x, family, ..Default::default() }).expect("unique target");
            println!(
                "{family:?} x={x} schedule {}: found {:010b} with p = {:.12}, {} queries ({} optimal), {} basic gates",
                r.schedule,
                r.found.unwrap(),
                r.success_probability.unwrap(),
                r.oracle_calls,
                optimal_query_reference(n),
                r.basic_gates
            );
        }
    }
}
