//! Split a sandpile into recurrent part, sink mass and a Laplacian term.

use threshold_lab::decompose::decompose;
use threshold_lab::recurrent::RecTable;
use threshold_lab::{MultiGraph, Sandpile};

fn main() -> threshold_lab::Result<()> {
    let g = MultiGraph::cycle(5)?;
    let z = 4;
    let t = RecTable::enumerate(&g, z)?;
    for s in [Sandpile::new(vec![3, -1, 0, 2, -6]), Sandpile::new(vec![1, 1, 1, 1, 1]), Sandpile::constant(5, -2)] {
        let d = decompose(&g, &s, z, &t)?;
        println!(
            "s = {s}: rho = {}, m = {}, v = {:?}, stabilizable = {}",
            d.rho.config(),
            d.m,
            d.v,
            d.is_stabilizable()
        );
        assert_eq!(d.reconstruct(&g)?, s);
    }
    Ok(())
}
