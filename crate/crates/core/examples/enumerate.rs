//! List the recurrent states of K4 with sink 3 and the burst of each
//! chip addition.

use threshold_lab::recurrent::RecTable;
use threshold_lab::MultiGraph;

fn main() -> threshold_lab::Result<()> {
    let g = MultiGraph::complete(4)?;
    let t = RecTable::enumerate(&g, 3)?;
    println!("kappa = {} (matrix-tree: {})", t.kappa(), g.spanning_tree_count(3)?);
    println!("{:>3}  {:<14} next state / burst for i = 0..3", "idx", "state");
    for idx in 0..t.kappa() {
        let moves: Vec<String> = (0..g.n())
            .map(|i| {
                let next = t.apply(i, idx);
                format!("{next:>2}/{}", t.burst_size(i, next))
            })
            .collect();
        println!("{idx:>3}  {:<14} {}", t.state(idx).to_string(), moves.join("  "));
    }
    Ok(())
}
