//! Stabilize a pile of chips on a 3x3 torus, with and without a sink.

use threshold_lab::sandpile::{stabilize_sinkless, stabilize_with_holes, StabilizeOutcome};
use threshold_lab::{MultiGraph, Sandpile};

fn main() -> threshold_lab::Result<()> {
    let g = MultiGraph::torus(3, 3)?;
    let mut s = Sandpile::zeros(g.n());
    s.add_at(4, 20)?;

    let run = stabilize_with_holes(&g, &s, &[0])?;
    println!("with a sink at 0: {}", run.result);
    println!("  topplings per vertex: {:?}", run.odometer.counts());
    println!("  chips lost to the sink: {}", run.absorbed[0]);

    for total in [20, 40] {
        let s = Sandpile::constant(g.n(), total / g.n() as i64);
        match stabilize_sinkless(&g, &s)? {
            StabilizeOutcome::Stabilized { result, .. } => println!("sinkless, {s}: stable at {result}"),
            StabilizeOutcome::Unstabilizable { .. } => {
                println!("sinkless, {s}: every vertex topples, never stabilizes")
            }
        }
    }
    Ok(())
}
