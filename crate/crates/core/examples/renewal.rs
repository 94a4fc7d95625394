//! Markov renewal: where does the running edge-length sum first cross n?

use threshold_lab::renewal::{crossing_limit, limit_law, simulate_crossing};
use threshold_lab::replicas::run_replicas;
use threshold_lab::stats::{law_to_f64, tv_distance, Histogram};
use threshold_lab::verify::example_chain;

fn main() -> threshold_lab::Result<()> {
    let chain = example_chain();
    let law = limit_law(&chain)?;
    for (&(x, y, m), p) in &law.mass {
        println!("edge {x}->{y}, overshoot {m}: {p}");
    }
    let crossings = run_replicas(20_000, 7, |_, rng| simulate_crossing(&chain, 0, 1_000, rng))?;
    let hist: Histogram<(usize, usize, u64)> = crossings.iter().map(|c| (c.prev, c.at, c.overshoot)).collect();
    println!("TV at n = 1000: {:.4}", tv_distance(&hist, &law_to_f64(&law.mass)));
    println!("last crossing of {{0,1}} lands on 1 with probability {}", crossing_limit(&chain, 0, 1)?);
    Ok(())
}
