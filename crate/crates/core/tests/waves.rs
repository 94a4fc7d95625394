mod common;

use threshold_lab::chains::{DriveDistribution, ReducedChain};
use threshold_lab::recurrent::RecTable;
use threshold_lab::replicas::replica_rng;
use threshold_lab::stats::{law_to_f64, tv_distance};
use threshold_lab::waves::{
    enumerate_forests, refined_limit_law, refined_threshold_sample, simulate_refined, toppling_set_histogram,
    toppling_set_law, wave_counts, wave_decompose, WaveTable,
};
use threshold_lab::{MultiGraph, Sandpile};

#[test]
fn wave_counts_equal_forest_counts() {
    for (name, g) in common::wave_graphs() {
        for z in 0..g.n() {
            let t = RecTable::enumerate(&g, z).unwrap();
            for i in (0..g.n()).filter(|&i| i != z) {
                let waves = wave_counts(&g, &t, i).unwrap();
                let forests = enumerate_forests(&g, i, z).unwrap();
                assert_eq!(waves, forests, "{name}: i={i} z={z}");
                assert_eq!(waves.zeroth as usize, t.kappa());
            }
        }
    }
}

#[test]
fn waves_compose_the_avalanche() {
    for (name, g) in common::wave_graphs() {
        let z = 0;
        let t = RecTable::enumerate(&g, z).unwrap();
        for i in 1..g.n() {
            for rho in 0..t.kappa() {
                let waves = wave_decompose(&g, &t.recurrent_state(rho), i).unwrap();
                assert!(waves[0].is_zeroth && !waves[0].is_last);
                assert_eq!(waves.iter().filter(|w| w.is_last).count(), usize::from(waves.len() > 1));
                for pair in waves.windows(2) {
                    assert_eq!(pair[0].config_after, pair[1].config_before, "{name}");
                }
                let last = waves.last().unwrap();
                assert_eq!(last.config_after, *t.state(t.apply(i, rho)), "{name}");
                let burst: u64 = waves.iter().map(|w| w.burst).sum();
                assert_eq!(burst as i64, t.burst_size(i, t.apply(i, rho)), "{name}");
            }
        }
    }
}

#[test]
fn refined_chain_tracks_unrefined() {
    let g = MultiGraph::cycle(4).unwrap();
    let t = RecTable::enumerate(&g, 3).unwrap();
    let wt = WaveTable::build(&g, &t).unwrap();
    let alpha = DriveDistribution::from_weights(&[1, 2, 2, 1]).unwrap();
    let s0 = Sandpile::constant(4, -6);
    let chain = ReducedChain::new(&g, &t, &alpha, &s0).unwrap();
    for r in 0..500 {
        let a = chain.run(&mut replica_rng(11, r));
        let b = refined_threshold_sample(&g, &t, &wt, &alpha, &s0, &mut replica_rng(11, r)).unwrap();
        assert_eq!(a.tau, b.additions);
        assert_eq!(a.epicenter, b.epicenter);
        assert_eq!(a.m_tau >= 0, b.m_tau >= 0);
        assert!(b.m_tau <= a.m_tau);
        assert!(b.steps >= b.additions);
    }
}

#[test]
fn refined_laws_are_normalized_and_sampled() {
    for (name, g) in [("triangle", MultiGraph::cycle(3).unwrap()), ("cycle4", MultiGraph::cycle(4).unwrap())] {
        let z = g.n() - 1;
        let t = RecTable::enumerate(&g, z).unwrap();
        let wt = WaveTable::build(&g, &t).unwrap();
        let alpha = DriveDistribution::uniform(g.n());
        refined_limit_law(&t, &wt, &alpha).unwrap();
        let law = law_to_f64(&toppling_set_law(&g, z, &alpha).unwrap());
        let samples = simulate_refined(&g, &t, &wt, &alpha, &Sandpile::constant(g.n(), -40), 30_000, 2).unwrap();
        let tv = tv_distance(&toppling_set_histogram(&samples), &law);
        assert!(tv < 0.03, "{name}: {tv}");
    }
}
