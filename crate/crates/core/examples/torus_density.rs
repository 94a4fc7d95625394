//! Threshold density on a larger torus, where enumeration is out of reach.
//! Run with `--release`.

use threshold_lab::chains::{DriveDistribution, TableFreeChain};
use threshold_lab::{MultiGraph, Sandpile};

fn main() -> threshold_lab::Result<()> {
    let side = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(8);
    let g = MultiGraph::torus(side, side)?;
    let n = g.n();
    let alpha = DriveDistribution::uniform(n);
    let chain = TableFreeChain::new(&g, n - 1, &alpha, &Sandpile::constant(n, -8))?;
    let est = chain.estimate_zeta_tau(2_000, 42)?;
    println!("torus {side}x{side}: zeta_tau = {:.4} (95% CI {:.4}..{:.4})", est.mean, est.ci95.0, est.ci95.1);
    Ok(())
}
