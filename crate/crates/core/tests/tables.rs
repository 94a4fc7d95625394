mod common;

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use threshold_lab::chains::{
    burst_laws, density_laws, epicenter_state_chain, normalization_constant, run_open, simulate_direct,
    simulate_reduced, sink_at_epicenter_law, sink_at_epicenter_limit, theoretical_joint, DriveDistribution,
    ReducedChain, ThresholdSample,
};
use threshold_lab::recurrent::{is_z_recurrent, RecTable};
use threshold_lab::renewal::limit_law;
use threshold_lab::replicas::replica_rng;
use threshold_lab::stats::{chi_square, law_to_f64, mutual_information, tv_distance, Histogram};
use threshold_lab::{MultiGraph, Rational, Sandpile};

fn joint_hist(samples: &[ThresholdSample]) -> Histogram<(usize, usize, u64)> {
    samples.iter().filter_map(|s| s.epicenter.map(|i| (i, s.rho_index, s.m_tau as u64))).collect()
}

fn joint_tv(g: &MultiGraph, h: i64, replicas: u64, seed: u64) -> f64 {
    let t = RecTable::enumerate(g, g.n() - 1).unwrap();
    let alpha = DriveDistribution::uniform(g.n());
    let chain = ReducedChain::new(g, &t, &alpha, &Sandpile::constant(g.n(), h)).unwrap();
    let law = law_to_f64(&theoretical_joint(&t, &alpha).unwrap().mass);
    tv_distance(&joint_hist(&simulate_reduced(&chain, replicas, seed).unwrap()), &law)
}

#[test]
fn rec_table_invariants() {
    for (name, g) in common::small_graphs() {
        for z in 0..g.n() {
            let t = RecTable::enumerate(&g, z).unwrap();
            assert_eq!(t.kappa() as u128, g.spanning_tree_count(z).unwrap(), "{name} z={z}");
            for s in t.states() {
                assert!(is_z_recurrent(&g, s, z).unwrap(), "{name}: {s}");
            }
            let mut av_sum = 0i64;
            for i in 0..g.n() {
                let mut seen = vec![false; t.kappa()];
                for rho in 0..t.kappa() {
                    let next = t.apply(i, rho);
                    assert!(!seen[next], "{name}: a_{i} not injective");
                    seen[next] = true;
                    assert_eq!(t.apply_inverse(i, next), rho);
                    assert_eq!(t.recorded_burst(i, next) as i64, t.burst_size(i, next));
                }
                av_sum += (0..t.kappa()).map(|rho| t.burst_size(i, rho)).sum::<i64>();
                if i == z {
                    assert!((0..t.kappa()).all(|rho| t.burst_size(z, rho) == 1));
                }
            }
            for i in 0..g.n() {
                let per: i64 = (0..t.kappa()).map(|rho| t.burst_size(i, rho)).sum();
                assert_eq!(per, t.kappa() as i64, "{name}: Σ_ρ av_{i}→{z}");
            }
            assert_eq!(av_sum, (g.n() * t.kappa()) as i64);
            let alpha = DriveDistribution::uniform(g.n());
            assert!(normalization_constant(&t, &alpha).unwrap().is_one());
            let laws = burst_laws(&t, &alpha).unwrap();
            assert!(laws.q_limit.iter().sum::<Rational>().is_one());
        }
    }
}

#[test]
fn s_tau_law_is_sink_independent() {
    for (name, g) in common::small_graphs() {
        let base = density_laws(&RecTable::enumerate(&g, 0).unwrap());
        for z in 1..g.n() {
            assert_eq!(density_laws(&RecTable::enumerate(&g, z).unwrap()), base, "{name} z={z}");
        }
    }
}

#[test]
fn direct_matches_reduced_per_run() {
    for (name, g) in common::small_graphs() {
        let z = g.n() - 1;
        let t = RecTable::enumerate(&g, z).unwrap();
        let alpha = DriveDistribution::uniform(g.n());
        let s0 = Sandpile::constant(g.n(), -2);
        let chain = ReducedChain::new(&g, &t, &alpha, &s0).unwrap();
        let reduced = simulate_reduced(&chain, 200, 5).unwrap();
        let direct = simulate_direct(&g, &t, &alpha, &s0, 200, 5).unwrap();
        for (r, d) in reduced.iter().zip(&direct) {
            assert_eq!(
                (r.epicenter, r.rho_index, r.m_tau, r.tau, r.s_tau_total),
                (d.epicenter, d.rho_index, d.m_tau, d.tau, d.s_tau_total),
                "{name}"
            );
        }
    }
}

#[test]
fn renewal_route_gives_the_joint_law() {
    for (name, g) in common::small_graphs() {
        let t = RecTable::enumerate(&g, g.n() - 1).unwrap();
        let weights: Vec<u64> = (1..=g.n() as u64).collect();
        let alpha = DriveDistribution::from_weights(&weights).unwrap();
        let joint = theoretical_joint(&t, &alpha).unwrap();
        let chain = epicenter_state_chain(&t, &alpha).unwrap();
        let law = limit_law(&chain).unwrap();
        let kappa = t.kappa();
        let mut marginal: BTreeMap<(usize, usize, u64), Rational> = BTreeMap::new();
        for (&(_, y, m), p) in &law.mass {
            *marginal.entry((y / kappa, y % kappa, m)).or_insert_with(Rational::zero) += p;
        }
        assert_eq!(marginal, joint.mass, "{name}");
    }
}

#[test]
fn convergence_improves_with_depth() {
    let g = MultiGraph::complete(4).unwrap();
    let shallow = joint_tv(&g, 1, 40_000, 9);
    let deep = joint_tv(&g, -40, 40_000, 9);
    assert!(deep < shallow && shallow > 0.05, "tv(-40) = {deep} vs tv(1) = {shallow}");
    assert!(deep < 0.03);
}

#[test]
fn open_chain_is_uniform_after_burn_in() {
    let g = MultiGraph::complete(4).unwrap();
    let t = RecTable::enumerate(&g, 3).unwrap();
    let alpha = DriveDistribution::from_weights(&[1, 2, 3, 4]).unwrap();
    let burn = 10 * t.kappa() as u64;
    let mut counts = vec![0u64; t.kappa()];
    for r in 0..20_000 {
        counts[run_open(&t, &alpha, 0, burn, &mut replica_rng(3, r))] += 1;
    }
    let probs = vec![1.0 / t.kappa() as f64; t.kappa()];
    let chi = chi_square(&counts, &probs);
    assert!(chi.accepts(0.001), "{chi:?}");
}

#[test]
fn epicenter_nearly_independent_of_previous() {
    let g = MultiGraph::complete(4).unwrap();
    let t = RecTable::enumerate(&g, 3).unwrap();
    let alpha = DriveDistribution::uniform(4);
    let chain = ReducedChain::new(&g, &t, &alpha, &Sandpile::constant(4, -20)).unwrap();
    let samples = simulate_reduced(&chain, 50_000, 4).unwrap();
    let pairs: Histogram<(usize, usize)> =
        samples.iter().filter_map(|s| Some((s.epicenter?, s.prev_epicenter?))).collect();
    assert!(mutual_information(&pairs) < 0.01);
}

#[test]
fn sink_at_epicenter_is_flat() {
    let g = MultiGraph::cycle(3).unwrap();
    let tables: Vec<RecTable> = (0..3).map(|z| RecTable::enumerate(&g, z).unwrap()).collect();
    let alpha = DriveDistribution::from_weights(&[1, 1, 2]).unwrap();
    let samples = simulate_direct(&g, &tables[2], &alpha, &Sandpile::constant(3, -15), 20_000, 8).unwrap();
    let hist = sink_at_epicenter_law(&g, &samples, &tables).unwrap();
    let limit = law_to_f64(&sink_at_epicenter_limit(&alpha, tables[0].kappa()));
    assert!(tv_distance(&hist, &limit) < 0.02);
}

#[test]
fn initial_condition_enters_only_through_its_total() {
    let g = MultiGraph::cycle(4).unwrap();
    let t = RecTable::enumerate(&g, 3).unwrap();
    let alpha = DriveDistribution::uniform(4);
    let law = law_to_f64(&theoretical_joint(&t, &alpha).unwrap().mass);
    for s0 in [Sandpile::new(vec![-80, 0, 0, 0]), Sandpile::new(vec![-30, -10, -25, -15])] {
        let chain = ReducedChain::new(&g, &t, &alpha, &s0).unwrap();
        let tv = tv_distance(&joint_hist(&simulate_reduced(&chain, 40_000, 6).unwrap()), &law);
        assert!(tv < 0.03, "{s0}: {tv}");
    }
}
