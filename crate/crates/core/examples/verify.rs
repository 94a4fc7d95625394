//! Run every invariant suite on a directed Eulerian graph and on K4.

use threshold_lab::verify::{run_suite, Suite};
use threshold_lab::MultiGraph;

fn main() -> threshold_lab::Result<()> {
    let directed = MultiGraph::new(4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1), (0, 2, 1), (2, 0, 1)])?;
    for (name, g) in [("directed", directed), ("K4", MultiGraph::complete(4)?)] {
        let report = run_suite(Suite::All, &g, 1)?;
        println!("== {name}\n{report}");
    }
    Ok(())
}
