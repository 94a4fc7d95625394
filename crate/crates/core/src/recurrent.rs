//! Recurrent configurations relative to a sink: the burning test, the open
//! chain addition operators `â_i`, and full enumeration of `Rec(z)`.
//!
//! Recurrent states carry the convention `ρ(z) = deg(z)`. Enumeration runs a
//! breadth-first closure under all `â_i` from a verified seed, then sorts
//! the states lexicographically so indices are canonical.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, VertexId};
use crate::sandpile::{stabilize_with_holes, Sandpile};

/// Default bound on `κ` for [`RecTable::enumerate`].
pub const DEFAULT_ENUMERATION_CAP: usize = 2_000_000;

/// A `z`-recurrent configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecurrentState {
    config: Sandpile,
    sink: VertexId,
}

impl RecurrentState {
    /// Wraps `config` after running the burning test.
    pub fn new(g: &MultiGraph, config: Sandpile, sink: VertexId) -> Result<Self> {
        if !is_z_recurrent(g, &config, sink)? {
            return Err(Error::PreconditionViolated(format!("{config} is not recurrent for sink {sink}")));
        }
        Ok(RecurrentState { config, sink })
    }

    pub(crate) fn new_unchecked(config: Sandpile, sink: VertexId) -> Self {
        RecurrentState { config, sink }
    }

    pub fn config(&self) -> &Sandpile {
        &self.config
    }

    pub fn values(&self) -> &[i64] {
        self.config.values()
    }

    pub fn sink(&self) -> VertexId {
        self.sink
    }

    pub fn into_sandpile(self) -> Sandpile {
        self.config
    }
}

fn check_sink_form(g: &MultiGraph, rho: &Sandpile, z: VertexId) -> Result<()> {
    g.check_vertex(z)?;
    rho.check_len(g)?;
    if rho.values()[z] != g.deg(z) {
        return Err(Error::PreconditionViolated(format!(
            "sink value {} differs from deg(z) = {}",
            rho.values()[z],
            g.deg(z)
        )));
    }
    if let Some(v) = (0..g.n()).find(|&v| v != z && rho.values()[v] >= g.deg(v)) {
        return Err(Error::PreconditionViolated(format!("vertex {v} is unstable in {rho}")));
    }
    Ok(())
}

/// Burning test: fire the sink once and stabilize with the sink as a hole;
/// `ρ` is recurrent iff every other vertex topples exactly once.
///
/// When the test passes the stabilization must reproduce `ρ`; a mismatch
/// is reported as [`Error::Inconsistent`] rather than trusted either way.
pub fn is_z_recurrent(g: &MultiGraph, rho: &Sandpile, z: VertexId) -> Result<bool> {
    check_sink_form(g, rho, z)?;
    let fired = rho.checked_add(&g.laplacian_apply(&Sandpile::delta(g.n(), z).into_values())?)?;
    let run = stabilize_with_holes(g, &fired, &[z])?;
    let once = (0..g.n()).all(|v| v == z || run.odometer.counts()[v] == 1);
    if once {
        let mut back = run.result.clone();
        back.add_at(z, run.absorbed[z])?;
        if back != *rho {
            return Err(Error::Inconsistent(format!(
                "burning test toppled every vertex once but returned {back} instead of {rho}"
            )));
        }
    }
    Ok(once)
}

/// `â_i ρ = S_z(ρ + δ_i)` together with the burst size: the chips that fall
/// into the sink, counting the added chip itself when `i = z`.
pub fn add_open(g: &MultiGraph, rho: &RecurrentState, i: VertexId) -> Result<(RecurrentState, u64)> {
    g.check_vertex(i)?;
    let (next, burst) = add_open_raw(g, rho.values(), rho.sink, i)?;
    Ok((RecurrentState::new_unchecked(next, rho.sink), burst))
}

pub(crate) fn add_open_raw(g: &MultiGraph, rho: &[i64], z: VertexId, i: VertexId) -> Result<(Sandpile, u64)> {
    if i == z {
        return Ok((Sandpile::new(rho.to_vec()), 1));
    }
    let mut s = Sandpile::new(rho.to_vec());
    s.add_at(i, 1)?;
    let run = stabilize_with_holes(g, &s, &[z])?;
    let burst = u64::try_from(run.absorbed[z]).map_err(|_| Error::Inconsistent("negative sink absorption".into()))?;
    Ok((run.result, burst))
}

/// Every element of `Rec(z)` with the permutations `â_i`, their inverses,
/// and burst sizes.
#[derive(Debug, Clone)]
pub struct RecTable {
    sink: VertexId,
    n: usize,
    states: Vec<Sandpile>,
    totals: Vec<i64>,
    index: HashMap<Vec<i64>, u32>,
    perm: Vec<Vec<u32>>,
    inv_perm: Vec<Vec<u32>>,
    /// `burst[i][ρ] = av_{i→z}(ρ)`, recorded while building `perm`.
    burst: Vec<Vec<u32>>,
}

fn off_sink_key(values: &[i64], z: VertexId) -> Vec<i64> {
    values.iter().enumerate().filter(|&(v, _)| v != z).map(|(_, &x)| x).collect()
}

impl RecTable {
    pub fn enumerate(g: &MultiGraph, z: VertexId) -> Result<Self> {
        Self::enumerate_with_cap(g, z, DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_with_cap(g: &MultiGraph, z: VertexId, cap: usize) -> Result<Self> {
        g.check_vertex(z)?;
        let kappa = g.spanning_tree_count(z)?;
        if kappa > cap as u128 {
            return Err(Error::CapExceeded { kappa, cap });
        }
        let n = g.n();

        let twice_deg = Sandpile::new(g.degrees().iter().map(|&d| 2 * d).collect());
        let mut seed = stabilize_with_holes(g, &twice_deg, &[z])?.result;
        seed.values_mut()[z] = g.deg(z);
        if !is_z_recurrent(g, &seed, z)? {
            return Err(Error::SeedNotRecurrent);
        }

        // Breadth-first closure; transitions[k][i] = (target, burst).
        let mut found: Vec<Sandpile> = vec![seed.clone()];
        let mut lookup: HashMap<Vec<i64>, u32> = HashMap::new();
        lookup.insert(off_sink_key(seed.values(), z), 0);
        let mut transitions: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut queue = VecDeque::from([0u32]);
        while let Some(k) = queue.pop_front() {
            let mut row = Vec::with_capacity(n);
            for i in 0..n {
                let (next, burst) = add_open_raw(g, found[k as usize].values(), z, i)?;
                let key = off_sink_key(next.values(), z);
                let target = match lookup.get(&key) {
                    Some(&t) => t,
                    None => {
                        let t = found.len() as u32;
                        if found.len() >= cap {
                            return Err(Error::CapExceeded { kappa, cap });
                        }
                        lookup.insert(key, t);
                        found.push(next);
                        queue.push_back(t);
                        t
                    }
                };
                let burst = u32::try_from(burst).map_err(|_| Error::Overflow("burst size"))?;
                row.push((target, burst));
            }
            // BFS pops in discovery order, so row k belongs to state k.
            transitions.push(row);
        }
        if found.len() as u128 != kappa {
            return Err(Error::Inconsistent(format!(
                "enumerated {} recurrent states but the matrix-tree count is {kappa}",
                found.len()
            )));
        }

        // Canonical (lexicographic) order.
        let mut order: Vec<u32> = (0..found.len() as u32).collect();
        order.sort_by(|&a, &b| found[a as usize].cmp(&found[b as usize]));
        let mut rank = vec![0u32; found.len()];
        for (new, &old) in order.iter().enumerate() {
            rank[old as usize] = new as u32;
        }
        let states: Vec<Sandpile> = order.iter().map(|&old| found[old as usize].clone()).collect();
        let totals = states.iter().map(Sandpile::total).collect::<Result<Vec<_>>>()?;
        let index = states.iter().enumerate().map(|(k, s)| (off_sink_key(s.values(), z), k as u32)).collect();

        let size = states.len();
        let mut perm = vec![vec![0u32; size]; n];
        let mut inv_perm = vec![vec![u32::MAX; size]; n];
        let mut burst = vec![vec![0u32; size]; n];
        for (old, row) in transitions.iter().enumerate() {
            let from = rank[old];
            for (i, &(to_old, b)) in row.iter().enumerate() {
                let to = rank[to_old as usize];
                perm[i][from as usize] = to;
                if inv_perm[i][to as usize] != u32::MAX {
                    return Err(Error::Inconsistent(format!("addition operator at {i} is not injective on Rec({z})")));
                }
                inv_perm[i][to as usize] = from;
                burst[i][to as usize] = b;
            }
        }

        let table = RecTable { sink: z, n, states, totals, index, perm, inv_perm, burst };
        table.check_burst_formula()?;
        Ok(table)
    }

    fn check_burst_formula(&self) -> Result<()> {
        for i in 0..self.n {
            for rho in 0..self.kappa() {
                if self.burst_size(i, rho) != i64::from(self.burst[i][rho]) {
                    return Err(Error::Inconsistent(format!(
                        "burst at ({i}, state {rho}) disagrees with the totals formula"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sink(&self) -> VertexId {
        self.sink
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `κ = #Rec(z)`.
    pub fn kappa(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Sandpile] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &Sandpile {
        &self.states[idx]
    }

    pub fn recurrent_state(&self, idx: usize) -> RecurrentState {
        RecurrentState::new_unchecked(self.states[idx].clone(), self.sink)
    }

    /// `|ρ|` including the sink value.
    pub fn total(&self, idx: usize) -> i64 {
        self.totals[idx]
    }

    /// Index of the state agreeing with `values` off the sink.
    pub fn index_of(&self, values: &[i64]) -> Option<usize> {
        self.index.get(&off_sink_key(values, self.sink)).map(|&k| k as usize)
    }

    /// `â_i` on state indices.
    pub fn apply(&self, i: VertexId, idx: usize) -> usize {
        self.perm[i][idx] as usize
    }

    pub fn apply_inverse(&self, i: VertexId, idx: usize) -> usize {
        self.inv_perm[i][idx] as usize
    }

    pub fn perm(&self, i: VertexId) -> &[u32] {
        &self.perm[i]
    }

    /// `av_{i→z}(ρ) = |â_i⁻¹ρ| − |ρ| + 1`.
    pub fn burst_size(&self, i: VertexId, idx: usize) -> i64 {
        self.totals[self.apply_inverse(i, idx)] - self.totals[idx] + 1
    }

    /// The burst recorded as sink absorption when `â_i` produced `idx`.
    pub fn recorded_burst(&self, i: VertexId, idx: usize) -> u32 {
        self.burst[i][idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> MultiGraph {
        MultiGraph::cycle(3).unwrap()
    }

    fn rs(v: &[i64]) -> RecurrentState {
        RecurrentState::new(&tri(), Sandpile::new(v.to_vec()), 2).unwrap()
    }

    #[test]
    fn burning_test_examples() {
        let g = tri();
        assert!(is_z_recurrent(&g, &Sandpile::new(vec![1, 1, 2]), 2).unwrap());
        assert!(!is_z_recurrent(&g, &Sandpile::new(vec![0, 0, 2]), 2).unwrap());
        let e = MultiGraph::new(2, &[(0, 1, 1), (1, 0, 1)]).unwrap();
        assert!(is_z_recurrent(&e, &Sandpile::new(vec![0, 1]), 1).unwrap());
        assert!(matches!(is_z_recurrent(&g, &Sandpile::new(vec![2, 1, 2]), 2), Err(Error::PreconditionViolated(_))));
        assert!(matches!(is_z_recurrent(&g, &Sandpile::new(vec![1, 1, 1]), 2), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn open_addition_examples() {
        let g = tri();
        let (next, b) = add_open(&g, &rs(&[1, 0, 2]), 0).unwrap();
        assert_eq!((next.values(), b), (&[0, 1, 2][..], 1));
        let (next, b) = add_open(&g, &rs(&[1, 1, 2]), 0).unwrap();
        assert_eq!((next.values(), b), (&[1, 0, 2][..], 2));
        let (next, b) = add_open(&g, &rs(&[0, 1, 2]), 2).unwrap();
        assert_eq!((next.values(), b), (&[0, 1, 2][..], 1));
    }

    #[test]
    fn enumeration_examples() {
        let e = MultiGraph::new(2, &[(0, 1, 1), (1, 0, 1)]).unwrap();
        let t = RecTable::enumerate(&e, 1).unwrap();
        assert_eq!(t.states(), &[Sandpile::new(vec![0, 1])]);

        let t = RecTable::enumerate(&tri(), 2).unwrap();
        let got: Vec<_> = t.states().iter().map(|s| s.values().to_vec()).collect();
        assert_eq!(got, vec![vec![0, 1, 2], vec![1, 0, 2], vec![1, 1, 2]]);

        let k4 = MultiGraph::complete(4).unwrap();
        assert_eq!(RecTable::enumerate(&k4, 3).unwrap().kappa(), 16);
        assert!(matches!(RecTable::enumerate_with_cap(&k4, 3, 10), Err(Error::CapExceeded { kappa: 16, cap: 10 })));
    }

    #[test]
    fn burst_size_examples() {
        let t = RecTable::enumerate(&tri(), 2).unwrap();
        let a = t.index_of(&[0, 1, 2]).unwrap();
        let c = t.index_of(&[1, 1, 2]).unwrap();
        assert_eq!(t.burst_size(0, a), 1);
        assert_eq!(t.burst_size(0, c), 0);
        assert_eq!(t.burst_size(1, a), 2);
        assert!((0..3).all(|r| t.burst_size(2, r) == 1));
    }
}
