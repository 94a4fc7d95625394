//! Split avalanches into waves and count them against spanning forests.

use threshold_lab::recurrent::RecTable;
use threshold_lab::waves::{enumerate_forests, wave_counts, wave_decompose};
use threshold_lab::MultiGraph;

fn main() -> threshold_lab::Result<()> {
    let g = MultiGraph::cycle(5)?;
    let (i, z) = (0, 4);
    let t = RecTable::enumerate(&g, z)?;

    let rho = (0..t.kappa()).max_by_key(|&k| t.total(k)).unwrap();
    println!("adding a chip at {i} to {}:", t.state(rho));
    for w in wave_decompose(&g, &t.recurrent_state(rho), i)? {
        println!("  wave {}: toppled {:?}, burst {}, -> {}", w.index, w.toppled_set, w.burst, w.config_after);
    }

    println!("dynamic counts: {:?}", wave_counts(&g, &t, i)?);
    println!("forest counts:  {:?}", enumerate_forests(&g, i, z)?);
    Ok(())
}
