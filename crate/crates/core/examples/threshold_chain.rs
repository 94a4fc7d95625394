//! Run the fixed-energy sandpile to its threshold many times and compare
//! the observed (epicenter, state, overshoot) law with the exact limit.

use threshold_lab::chains::{simulate_reduced, theoretical_joint, DriveDistribution, ReducedChain};
use threshold_lab::recurrent::RecTable;
use threshold_lab::stats::{law_to_f64, tv_distance, Histogram};
use threshold_lab::{MultiGraph, Sandpile};

fn main() -> threshold_lab::Result<()> {
    let g = MultiGraph::torus(2, 2)?;
    let t = RecTable::enumerate(&g, 3)?;
    let alpha = DriveDistribution::uniform(g.n());
    let chain = ReducedChain::new(&g, &t, &alpha, &Sandpile::constant(g.n(), -40))?;
    let samples = simulate_reduced(&chain, 50_000, 1)?;

    let hist: Histogram<(usize, usize, u64)> =
        samples.iter().filter_map(|s| s.epicenter.map(|i| (i, s.rho_index, s.m_tau as u64))).collect();
    let law = law_to_f64(&theoretical_joint(&t, &alpha)?.mass);
    println!("{} samples, {} cells in the limit law", hist.total(), law.len());
    println!("TV distance to the limit: {:.4}", tv_distance(&hist, &law));
    let mean_tau = samples.iter().map(|s| s.tau as f64).sum::<f64>() / samples.len() as f64;
    println!("mean threshold time: {mean_tau:.2}");
    Ok(())
}
