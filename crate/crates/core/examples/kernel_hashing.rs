//! Random affine hashes over GF(2): kernel parametrization, pairwise
//! independence, and the kernel-dimension tail.

use searchkit::gf2::{
    kernel_dim_distribution, pairwise_independence_check, parametrize_kernel, sample_hash, trial_rng,
    unique_intersection_count,
};

fn main() {
    let mut rng = trial_rng(2024, 0);
    let h = sample_hash(10, 4, &mut rng).unwrap();
    match parametrize_kernel(&h) {
        Some(g) => {
            println!("kernel dimension {}, heaviest column {} (limit {})", g.d, g.max_column_weight(), 10 - g.d + 1);
            for i in 0..4 {
                let x = g.eval(i);
                println!("  g({i}) = {x:010b}, h(g({i})) = {}", h.eval(x));
            }
        }
        None => println!("empty kernel"),
    }
    for (n, k) in [(1, 1), (3, 2), (5, 2)] {
        println!("H_{{{n},{k}}} pairwise independent: {}", pairwise_independence_check(n, k).unwrap());
    }
    let (hits, total) = unique_intersection_count(4, 3, &[1, 6, 11]);
    println!("P(exactly one of 3 points in the kernel), n=4, k=3: {hits}/{total} = {:.4}", hits as f64 / total as f64);
    let dist = kernel_dim_distribution(10, 5, 100_000, 7).unwrap();
    let ci = dist.tail_interval(7);
    println!("P(d >= 7) at n=10, k=5: {}/{} (99% interval {:.5}..{:.5})", dist.at_least(7), dist.trials, ci.low, ci.high);
    print!("{}", dist.to_csv());
}
