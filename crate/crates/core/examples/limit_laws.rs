//! Exact limit laws on the triangle: burst sizes and threshold density.

use threshold_lab::chains::{burst_laws, density_laws, normalization_constant, theta_z, DriveDistribution};
use threshold_lab::recurrent::RecTable;
use threshold_lab::MultiGraph;

fn main() -> threshold_lab::Result<()> {
    let g = MultiGraph::cycle(3)?;
    let t = RecTable::enumerate(&g, 2)?;
    let alpha = DriveDistribution::uniform(3);

    for (idx, theta) in theta_z(&t, &alpha)?.iter().enumerate() {
        println!("theta({}) = {theta}", t.state(idx));
    }
    let b = burst_laws(&t, &alpha)?;
    for (size, (p, q)) in b.p.iter().zip(&b.q_limit).enumerate() {
        println!("burst {size}: stationary {p}, at threshold {q}");
    }
    let d = density_laws(&t);
    println!("|s_tau| law: {:?}", d.s_tau_law.iter().map(|(n, p)| format!("{n}: {p}")).collect::<Vec<_>>());
    println!("zeta_s = {}, Z = {}", d.zeta_s, normalization_constant(&t, &alpha)?);
    Ok(())
}
