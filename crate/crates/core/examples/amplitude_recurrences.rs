//! Marked-element amplitudes level by level, from the recurrences and from
//! statevector simulation.

use searchkit::search::{simulated_trace, DiffuserSchedule, Family};

fn main() {
    let schedule: DiffuserSchedule = "2,3,4".parse().unwrap();
    println!("schedule {schedule}");
    println!("{:>5} {:>18} {:>18} {:>18} {:>18}", "level", "nested", "simulated", "tree", "simulated");
    let alpha = Family::Nested.trace(&schedule);
    let beta = Family::Tree.trace(&schedule);
    let alpha_sim = simulated_trace(Family::Nested, &schedule, 5).unwrap();
    let beta_sim = simulated_trace(Family::Tree, &schedule, 5).unwrap();
    for j in 0..alpha.0.len() {
        println!("{j:>5} {:>18.15} {:>18.15} {:>18.15} {:>18.15}", alpha.0[j], alpha_sim.0[j], beta.0[j], beta_sim.0[j]);
    }
}
