//! Wave decomposition of avalanches on undirected graphs.
//!
//! A wave from `i` to `z` topples the source once and then stabilizes with
//! both `i` and `z` forbidden to topple. Repeating until `i` is stable
//! reproduces the avalanche of `ρ + δ_i`. Counts of waves by kind match
//! counts of two-component spanning forests, which is checked here by
//! brute force on small graphs.

use std::collections::{BTreeMap, VecDeque};

use itertools::Itertools;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::chains::DriveDistribution;
use crate::decompose::decompose;
use crate::error::{Error, Result};
use crate::graph::{MultiGraph, VertexId};
use crate::recurrent::{RecTable, RecurrentState};
use crate::replicas::run_replicas;
use crate::sandpile::{stabilize_with_holes, Sandpile};
use crate::stats::Histogram;
use crate::Rational;

/// Largest graph accepted by the brute-force forest enumeration.
pub const MAX_FOREST_VERTICES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WaveRecord {
    pub index: usize,
    pub config_before: Sandpile,
    pub config_after: Sandpile,
    /// Sorted. Empty for the zeroth wave.
    pub toppled_set: Vec<VertexId>,
    /// Chips delivered to the sink during this wave.
    pub burst: u64,
    pub is_zeroth: bool,
    /// Nonzero wave after which the source is stable. The zeroth wave is
    /// never flagged, even when the addition itself is stable.
    pub is_last: bool,
    pub is_bursting: bool,
}

fn require_wave_graph(g: &MultiGraph, i: VertexId, z: VertexId) -> Result<()> {
    g.check_vertex(i)?;
    g.check_vertex(z)?;
    if !g.is_bidirected() {
        return Err(Error::NotUndirected);
    }
    if i == z {
        return Err(Error::PreconditionViolated("waves need a source distinct from the sink".into()));
    }
    Ok(())
}

/// `W(η) = S_{i,z}(η + Δδ_i)`, with the sink pinned at `deg(z)` afterwards.
fn wave(g: &MultiGraph, eta: &Sandpile, i: VertexId, z: VertexId) -> Result<(Sandpile, Vec<VertexId>, u64)> {
    let mut start = eta.checked_add(&g.laplacian_apply(&Sandpile::delta(g.n(), i).into_values())?)?;
    start.values_mut()[z] = g.deg(z);
    let run = stabilize_with_holes(g, &start, &[i, z])?;
    let mut after = run.result;
    after.add_at(i, run.absorbed[i])?;
    let counts = run.odometer.counts();
    if let Some(v) = counts.iter().position(|&c| c > 1) {
        return Err(Error::Inconsistent(format!("vertex {v} toppled {} times in one wave", counts[v])));
    }
    let mut toppled = run.odometer.toppled_set();
    toppled.push(i);
    toppled.sort_unstable();
    let burst = g.multiplicity(i, z) + run.absorbed[z];
    let edge_count: i64 = toppled.iter().map(|&v| g.multiplicity(v, z)).sum();
    if burst != edge_count {
        return Err(Error::Inconsistent(format!(
            "wave burst {burst} differs from the {edge_count} edges joining the toppled set to the sink"
        )));
    }
    Ok((after, toppled, burst as u64))
}

/// Splits the avalanche of `ρ + δ_i` into its zeroth and nonzero waves.
pub fn wave_decompose(g: &MultiGraph, rho: &RecurrentState, i: VertexId) -> Result<Vec<WaveRecord>> {
    let z = rho.sink();
    require_wave_graph(g, i, z)?;
    let mut eta = rho.config().clone();
    eta.add_at(i, 1)?;
    let mut records = vec![WaveRecord {
        index: 0,
        config_before: rho.config().clone(),
        config_after: eta.clone(),
        toppled_set: Vec::new(),
        burst: 0,
        is_zeroth: true,
        is_last: false,
        is_bursting: false,
    }];
    while eta.values()[i] >= g.deg(i) {
        if eta.values()[i] != g.deg(i) {
            return Err(Error::Inconsistent(format!("source holds {} chips before a wave", eta.values()[i])));
        }
        let (after, toppled_set, burst) = wave(g, &eta, i, z)?;
        records.push(WaveRecord {
            index: records.len(),
            config_before: eta,
            config_after: after.clone(),
            toppled_set,
            burst,
            is_zeroth: false,
            is_last: after.values()[i] < g.deg(i),
            is_bursting: burst > 0,
        });
        eta = after;
    }
    Ok(records)
}

/// Counts by wave kind. `nonzero` excludes zeroth waves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct WaveCounts {
    pub zeroth: u64,
    pub nonzero: u64,
    pub last: u64,
    pub bursting: u64,
}

impl WaveCounts {
    /// Zeroth and nonzero waves together (trees plus forests).
    pub fn waves(&self) -> u64 {
        self.zeroth + self.nonzero
    }
}

/// Undirected edges, parallel edges repeated, loops dropped.
fn undirected_edges(g: &MultiGraph) -> Vec<(VertexId, VertexId)> {
    let mut out = Vec::new();
    for (u, v, c) in g.edges() {
        if u < v {
            out.extend(std::iter::repeat_n((u, v), c as usize));
        }
    }
    out
}

struct Components(Vec<usize>);

impl Components {
    fn new(n: usize) -> Self {
        Components((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }

    /// False if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

/// Edge subsets of size `k` that form forests, with their component maps.
fn forests_of_size<'e>(
    n: usize,
    edges: &'e [(VertexId, VertexId)],
    k: usize,
) -> impl Iterator<Item = (Vec<&'e (VertexId, VertexId)>, Components)> + 'e {
    edges.iter().combinations(k).filter_map(move |subset| {
        let mut comp = Components::new(n);
        subset.iter().all(|&&(u, v)| comp.union(u, v)).then_some((subset, comp))
    })
}

fn check_forest_size(g: &MultiGraph) -> Result<()> {
    if g.n() > MAX_FOREST_VERTICES {
        return Err(Error::TooLarge(g.n()));
    }
    if !g.is_bidirected() {
        return Err(Error::NotUndirected);
    }
    Ok(())
}

/// Brute-force spanning tree and two-component forest counts.
pub fn enumerate_forests(g: &MultiGraph, i: VertexId, z: VertexId) -> Result<WaveCounts> {
    check_forest_size(g)?;
    require_wave_graph(g, i, z)?;
    let n = g.n();
    let edges = undirected_edges(g);
    let mut counts = WaveCounts { zeroth: forests_of_size(n, &edges, n - 1).count() as u64, ..WaveCounts::default() };
    for (_, mut comp) in forests_of_size(n, &edges, n - 2) {
        let ri = comp.find(i);
        if ri == comp.find(z) {
            continue;
        }
        counts.nonzero += 1;
        let in_ti: Vec<bool> = (0..n).map(|v| comp.find(v) == ri).collect();
        if g.out_edges(i).iter().any(|&(w, _)| !in_ti[w]) {
            counts.last += 1;
        }
        if g.out_edges(z).iter().any(|&(w, _)| in_ti[w]) {
            counts.bursting += 1;
        }
    }
    Ok(counts)
}

/// Wave counts from the dynamics, summed over `ρ ∈ Rec(z)`.
pub fn wave_counts(g: &MultiGraph, table: &RecTable, i: VertexId) -> Result<WaveCounts> {
    let mut counts = WaveCounts::default();
    for idx in 0..table.kappa() {
        for w in wave_decompose(g, &table.recurrent_state(idx), i)? {
            if w.is_zeroth {
                counts.zeroth += 1;
            } else {
                counts.nonzero += 1;
            }
            counts.last += u64::from(w.is_last);
            counts.bursting += u64::from(w.is_bursting);
        }
    }
    Ok(counts)
}

/// `#{spanning trees t : t_i = A}` for every `A`, where `t_i` is the set of
/// vertices whose tree path to `z` ends with the same edge as that of `i`.
pub fn tree_toppling_sets(g: &MultiGraph, i: VertexId, z: VertexId) -> Result<BTreeMap<Vec<VertexId>, u64>> {
    check_forest_size(g)?;
    require_wave_graph(g, i, z)?;
    let n = g.n();
    let edges = undirected_edges(g);
    let mut out = BTreeMap::new();
    for (tree, _) in forests_of_size(n, &edges, n - 1) {
        let mut adj = vec![Vec::new(); n];
        for &&(u, v) in &tree {
            adj[u].push(v);
            adj[v].push(u);
        }
        // Label each vertex by the child of z its path passes through.
        let mut branch = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &c in &adj[z] {
            branch[c] = c;
            queue.push_back(c);
        }
        branch[z] = z;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if branch[w] == usize::MAX {
                    branch[w] = branch[u];
                    queue.push_back(w);
                }
            }
        }
        let set: Vec<VertexId> = (0..n).filter(|&v| v != z && branch[v] == branch[i]).collect();
        *out.entry(set).or_insert(0) += 1;
    }
    Ok(out)
}

/// Nonzero waves of every avalanche `ρ + δ_i`, indexed `[i][ρ]`. The row
/// for the sink is empty.
#[derive(Debug, Clone)]
pub struct WaveTable {
    waves: Vec<Vec<Vec<WaveRecord>>>,
}

impl WaveTable {
    pub fn build(g: &MultiGraph, table: &RecTable) -> Result<Self> {
        let z = table.sink();
        let mut waves = Vec::with_capacity(g.n());
        for i in 0..g.n() {
            if i == z {
                waves.push(Vec::new());
                continue;
            }
            let mut row = Vec::with_capacity(table.kappa());
            for idx in 0..table.kappa() {
                let rho = table.recurrent_state(idx);
                let mut records = wave_decompose(g, &rho, i)?;
                let last = records.last().expect("zeroth wave").config_after.clone();
                let target = table.apply(i, idx);
                if last != *table.state(target) {
                    return Err(Error::Inconsistent(format!("waves of {} at {i} end at {last}", rho.config())));
                }
                let total: u64 = records.iter().map(|w| w.burst).sum();
                if total as i64 != table.burst_size(i, target) {
                    return Err(Error::Inconsistent(format!("wave bursts of {} at {i} sum to {total}", rho.config())));
                }
                records.remove(0);
                row.push(records);
            }
            waves.push(row);
        }
        Ok(WaveTable { waves })
    }

    /// Nonzero waves of `ρ + δ_i`, for `i` other than the sink.
    pub fn waves(&self, i: VertexId, rho: usize) -> &[WaveRecord] {
        &self.waves[i][rho]
    }
}

/// Threshold of the refined chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefinedSample {
    /// `None` when `τ = 0`.
    pub epicenter: Option<VertexId>,
    /// Configuration after the threshold wave.
    pub eta: Sandpile,
    pub m_tau: i64,
    /// Vertices toppling in the threshold wave; empty for a sink drop.
    pub toppled_set: Vec<VertexId>,
    /// Refined time: one step per addition and one per wave.
    pub steps: u64,
    /// Number of additions, equal to the unrefined `τ`.
    pub additions: u64,
}

/// Runs the refined chain from `s0`. A chip dropped on the sink counts as a
/// single step with burst 1 and empty toppling set.
pub fn refined_threshold_sample<R: Rng + ?Sized>(
    g: &MultiGraph,
    table: &RecTable,
    waves: &WaveTable,
    alpha: &DriveDistribution,
    s0: &Sandpile,
    rng: &mut R,
) -> Result<RefinedSample> {
    let z = table.sink();
    let d = decompose(g, s0, z, table)?;
    let mut rho = d.rho_index.expect("table supplied");
    let mut m = d.m;
    let mut steps = 0u64;
    let mut additions = 0u64;
    if m >= 0 {
        return Ok(RefinedSample {
            epicenter: None,
            eta: table.state(rho).clone(),
            m_tau: m,
            toppled_set: Vec::new(),
            steps,
            additions,
        });
    }
    loop {
        let i = alpha.sample(rng);
        steps += 1;
        additions += 1;
        if i == z {
            m += 1;
            if m >= 0 {
                return Ok(RefinedSample {
                    epicenter: Some(z),
                    eta: table.state(rho).clone(),
                    m_tau: m,
                    toppled_set: Vec::new(),
                    steps,
                    additions,
                });
            }
            continue;
        }
        for w in waves.waves(i, rho) {
            steps += 1;
            m += w.burst as i64;
            if m >= 0 {
                return Ok(RefinedSample {
                    epicenter: Some(i),
                    eta: w.config_after.clone(),
                    m_tau: m,
                    toppled_set: w.toppled_set.clone(),
                    steps,
                    additions,
                });
            }
        }
        rho = table.apply(i, rho);
    }
}

pub fn simulate_refined(
    g: &MultiGraph,
    table: &RecTable,
    waves: &WaveTable,
    alpha: &DriveDistribution,
    s0: &Sandpile,
    replicas: u64,
    seed: u64,
) -> Result<Vec<RefinedSample>> {
    run_replicas(replicas, seed, |_, rng| refined_threshold_sample(g, table, waves, alpha, s0, rng))
}

/// Limit law of `(i_τ, η_τ, m_τ)` for the refined chain: mass `α_i/κ` on
/// `0 ≤ m < b_{i→z}(η)` for every nonzero wave, plus `α_z/κ` on each
/// `(z, ρ, 0)`.
pub fn refined_limit_law(
    table: &RecTable,
    waves: &WaveTable,
    alpha: &DriveDistribution,
) -> Result<BTreeMap<(VertexId, Sandpile, u64), Rational>> {
    let z = table.sink();
    let kappa = Rational::from_integer((table.kappa() as u64).into());
    let mut law: BTreeMap<(VertexId, Sandpile, u64), Rational> = BTreeMap::new();
    for i in 0..table.n() {
        let w = alpha.prob(i) / &kappa;
        for rho in 0..table.kappa() {
            if i == z {
                *law.entry((z, table.state(rho).clone(), 0)).or_insert_with(Rational::zero) += &w;
                continue;
            }
            for wave in waves.waves(i, rho) {
                for m in 0..wave.burst {
                    *law.entry((i, wave.config_after.clone(), m)).or_insert_with(Rational::zero) += &w;
                }
            }
        }
    }
    let total: Rational = law.values().sum();
    if total != Rational::one() {
        return Err(Error::Inconsistent(format!("refined limit law sums to {total}")));
    }
    Ok(law)
}

/// Limit law of `(i_τ, A_τ)`: `(α_i/κ)·#{trees t : t_i = A}`, and `α_z`
/// on `(z, ∅)`.
pub fn toppling_set_law(
    g: &MultiGraph,
    z: VertexId,
    alpha: &DriveDistribution,
) -> Result<BTreeMap<(VertexId, Vec<VertexId>), Rational>> {
    let kappa = Rational::from_integer(g.spanning_tree_count(z)?.into());
    let mut law = BTreeMap::new();
    for i in 0..g.n() {
        if i == z {
            law.insert((z, Vec::new()), alpha.prob(z).clone());
            continue;
        }
        for (set, count) in tree_toppling_sets(g, i, z)? {
            law.insert((i, set), alpha.prob(i) * Rational::from_integer(count.into()) / &kappa);
        }
    }
    let total: Rational = law.values().sum();
    if total != Rational::one() {
        return Err(Error::Inconsistent(format!("toppling-set law sums to {total}")));
    }
    Ok(law)
}

/// Empirical `(i_τ, A_τ)` histogram; `τ = 0` samples are skipped.
pub fn toppling_set_histogram(samples: &[RefinedSample]) -> Histogram<(VertexId, Vec<VertexId>)> {
    samples.iter().filter_map(|s| s.epicenter.map(|i| (i, s.toppled_set.clone()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::replica_rng;

    fn triangle() -> (MultiGraph, RecTable) {
        let g = MultiGraph::cycle(3).unwrap();
        let t = RecTable::enumerate(&g, 2).unwrap();
        (g, t)
    }

    #[test]
    fn triangle_waves() {
        let (g, t) = triangle();
        let w = wave_decompose(&g, &t.recurrent_state(t.index_of(&[1, 1, 2]).unwrap()), 0).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!((w[1].toppled_set.clone(), w[1].burst, w[1].is_last, w[1].is_bursting), (vec![0, 1], 2, true, true));
        let w = wave_decompose(&g, &t.recurrent_state(t.index_of(&[1, 0, 2]).unwrap()), 0).unwrap();
        assert_eq!((w.len(), w[1].toppled_set.clone(), w[1].burst), (2, vec![0], 1));
        let w = wave_decompose(&g, &t.recurrent_state(t.index_of(&[0, 1, 2]).unwrap()), 0).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn triangle_counts() {
        let (g, t) = triangle();
        let expected = WaveCounts { zeroth: 3, nonzero: 2, last: 2, bursting: 2 };
        assert_eq!(enumerate_forests(&g, 0, 2).unwrap(), expected);
        assert_eq!(wave_counts(&g, &t, 0).unwrap(), expected);
    }

    #[test]
    fn path_and_edge_forests() {
        let path = MultiGraph::from_undirected(3, &[(0, 1), (1, 2)]).unwrap();
        let c = enumerate_forests(&path, 0, 2).unwrap();
        assert_eq!((c.zeroth, c.nonzero), (1, 2));
        let edge = MultiGraph::from_undirected(2, &[(0, 1)]).unwrap();
        let c = enumerate_forests(&edge, 0, 1).unwrap();
        assert_eq!((c.zeroth, c.nonzero), (1, 1));
    }

    #[test]
    fn rejects_directed_and_equal_endpoints() {
        let g = MultiGraph::new(3, &[(0, 1, 1), (1, 2, 1), (2, 0, 1)]).unwrap();
        assert!(matches!(enumerate_forests(&g, 0, 2), Err(Error::NotUndirected)));
        let (g, t) = triangle();
        assert!(wave_decompose(&g, &t.recurrent_state(0), 2).is_err());
    }

    #[test]
    fn triangle_toppling_sets() {
        let (g, _) = triangle();
        let sets = tree_toppling_sets(&g, 0, 2).unwrap();
        assert_eq!(sets, BTreeMap::from([(vec![0], 1), (vec![0, 1], 2)]));
        let law = toppling_set_law(&g, 2, &DriveDistribution::uniform(3)).unwrap();
        let third = Rational::new(1.into(), 3.into());
        assert_eq!(law[&(2, vec![])], third);
        assert_eq!(law[&(0, vec![0, 1])], Rational::new(2.into(), 9.into()));
    }

    #[test]
    fn refined_law_and_sink_drop() {
        let (g, t) = triangle();
        let wt = WaveTable::build(&g, &t).unwrap();
        let alpha = DriveDistribution::uniform(3);
        let law = refined_limit_law(&t, &wt, &alpha).unwrap();
        assert_eq!(law.keys().filter(|k| k.0 == 2).count(), 3);
        let s = refined_threshold_sample(&g, &t, &wt, &alpha, &Sandpile::new(vec![0, 0, -1]), &mut replica_rng(1, 0))
            .unwrap();
        if s.epicenter == Some(2) {
            assert!(s.toppled_set.is_empty());
        }
        assert!(s.m_tau >= 0);
    }
}
