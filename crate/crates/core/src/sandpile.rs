//! Chip configurations, toppling and stabilization.
//!
//! Two stabilization flavours are provided. Sinkless stabilization topples
//! until every vertex is stable, and reports the configuration as
//! unstabilizable as soon as every vertex has toppled at least once (on a
//! connected Eulerian graph a stabilizing odometer can never be positive
//! everywhere, since `Δ1 = 0`). Stabilization with holes forbids a nonempty
//! set of vertices to topple; chips sent to a hole are tallied in
//! `absorbed` and the hole's own value is left untouched.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, VertexId};

/// Signed chip counts, one per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Sandpile(Vec<i64>);

impl Sandpile {
    pub fn new(values: Vec<i64>) -> Self {
        Sandpile(values)
    }

    pub fn zeros(n: usize) -> Self {
        Sandpile(vec![0; n])
    }

    pub fn constant(n: usize, h: i64) -> Self {
        Sandpile(vec![h; n])
    }

    /// `δ_v` on `n` vertices.
    pub fn delta(n: usize, v: VertexId) -> Self {
        let mut s = Self::zeros(n);
        s.0[v] = 1;
        s
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [i64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<i64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|s|`, the total number of chips.
    pub fn total(&self) -> Result<i64> {
        self.0.iter().try_fold(0i64, |acc, &x| acc.checked_add(x)).ok_or(Error::Overflow("sandpile total"))
    }

    pub fn add_at(&mut self, v: VertexId, amount: i64) -> Result<()> {
        self.0[v] = self.0[v].checked_add(amount).ok_or(Error::Overflow("chip addition"))?;
        Ok(())
    }

    pub fn checked_add(&self, other: &[i64]) -> Result<Sandpile> {
        self.0
            .iter()
            .zip(other)
            .map(|(&a, &b)| a.checked_add(b))
            .collect::<Option<Vec<_>>>()
            .map(Sandpile)
            .ok_or(Error::Overflow("sandpile addition"))
    }

    pub fn is_stable(&self, g: &MultiGraph) -> bool {
        self.0.iter().enumerate().all(|(v, &x)| x < g.deg(v))
    }

    pub(crate) fn check_len(&self, g: &MultiGraph) -> Result<()> {
        if self.0.len() == g.n() {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: g.n(), got: self.0.len() })
        }
    }
}

impl From<Vec<i64>> for Sandpile {
    fn from(v: Vec<i64>) -> Self {
        Sandpile(v)
    }
}

impl fmt::Display for Sandpile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, x) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Per-vertex toppling counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Odometer(Vec<u64>);

impl Odometer {
    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    /// Counts as signed integers, for Laplacian arithmetic.
    pub fn as_signed(&self) -> Result<Vec<i64>> {
        self.0.iter().map(|&c| i64::try_from(c).map_err(|_| Error::Overflow("odometer"))).collect()
    }

    pub fn toppled_set(&self) -> Vec<VertexId> {
        (0..self.0.len()).filter(|&v| self.0[v] > 0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StabilizeOutcome {
    Stabilized {
        result: Sandpile,
        odometer: Odometer,
    },
    /// `certificate[v]` records whether `v` toppled before the run was cut
    /// off; it is all-true by construction.
    Unstabilizable {
        certificate: Vec<bool>,
    },
}

impl StabilizeOutcome {
    pub fn is_stabilized(&self) -> bool {
        matches!(self, StabilizeOutcome::Stabilized { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoleStabilization {
    /// Stable off the holes; hole values equal the input.
    pub result: Sandpile,
    /// Zero at every hole.
    pub odometer: Odometer,
    /// Chips delivered to each vertex while it was a hole (zero elsewhere).
    pub absorbed: Vec<i64>,
}

/// Order in which unstable vertices are toppled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopplingOrder {
    /// FIFO queue; each dequeued vertex topples `⌊s(i)/deg(i)⌋` times at once.
    #[default]
    Fifo,
    /// One toppling at a time at an unstable vertex chosen uniformly at
    /// random from a seeded stream.
    Random(u64),
}

struct Engine<'g> {
    g: &'g MultiGraph,
    values: Vec<i64>,
    odometer: Vec<u64>,
    absorbed: Vec<i64>,
    forbidden: Vec<bool>,
    toppled_vertices: usize,
}

enum EngineStop {
    Stable,
    AllToppled,
}

impl<'g> Engine<'g> {
    fn new(g: &'g MultiGraph, s: &Sandpile, holes: &[VertexId]) -> Result<Self> {
        s.check_len(g)?;
        let mut forbidden = vec![false; g.n()];
        for &h in holes {
            g.check_vertex(h)?;
            forbidden[h] = true;
        }
        Ok(Engine {
            g,
            values: s.values().to_vec(),
            odometer: vec![0; g.n()],
            absorbed: vec![0; g.n()],
            forbidden,
            toppled_vertices: 0,
        })
    }

    fn unstable(&self, v: VertexId) -> bool {
        !self.forbidden[v] && self.values[v] >= self.g.deg(v)
    }

    /// Topples `v` exactly `k` times. Caller guarantees legality.
    fn topple(&mut self, v: VertexId, k: i64) -> Result<()> {
        let ovf = || Error::Overflow("toppling");
        let d = self.g.deg(v);
        self.values[v] = d.checked_mul(k).and_then(|x| self.values[v].checked_sub(x)).ok_or_else(ovf)?;
        for &(w, c) in self.g.out_edges(v) {
            let amount = c.checked_mul(k).ok_or_else(ovf)?;
            let slot = if self.forbidden[w] { &mut self.absorbed[w] } else { &mut self.values[w] };
            *slot = slot.checked_add(amount).ok_or_else(ovf)?;
        }
        if self.odometer[v] == 0 {
            self.toppled_vertices += 1;
        }
        self.odometer[v] += k as u64;
        Ok(())
    }

    fn run(&mut self, order: TopplingOrder, stop_when_all_toppled: bool) -> Result<EngineStop> {
        let n = self.g.n();
        match order {
            TopplingOrder::Fifo => {
                let mut queued = vec![false; n];
                let mut queue: VecDeque<VertexId> = VecDeque::new();
                for (v, q) in queued.iter_mut().enumerate() {
                    if self.unstable(v) {
                        *q = true;
                        queue.push_back(v);
                    }
                }
                while let Some(v) = queue.pop_front() {
                    queued[v] = false;
                    if !self.unstable(v) {
                        continue;
                    }
                    let k = self.values[v] / self.g.deg(v);
                    self.topple(v, k)?;
                    if stop_when_all_toppled && self.toppled_vertices == n {
                        return Ok(EngineStop::AllToppled);
                    }
                    for &(w, _) in self.g.out_edges(v) {
                        if !queued[w] && self.unstable(w) {
                            queued[w] = true;
                            queue.push_back(w);
                        }
                    }
                }
            }
            TopplingOrder::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                loop {
                    let unstable: Vec<VertexId> = (0..n).filter(|&v| self.unstable(v)).collect();
                    if unstable.is_empty() {
                        break;
                    }
                    let v = unstable[rng.random_range(0..unstable.len())];
                    self.topple(v, 1)?;
                    if stop_when_all_toppled && self.toppled_vertices == n {
                        return Ok(EngineStop::AllToppled);
                    }
                }
            }
        }
        Ok(EngineStop::Stable)
    }
}

pub fn stabilize_sinkless(g: &MultiGraph, s: &Sandpile) -> Result<StabilizeOutcome> {
    stabilize_sinkless_ordered(g, s, TopplingOrder::Fifo)
}

pub fn stabilize_sinkless_ordered(g: &MultiGraph, s: &Sandpile, order: TopplingOrder) -> Result<StabilizeOutcome> {
    let mut engine = Engine::new(g, s, &[])?;
    Ok(match engine.run(order, true)? {
        EngineStop::Stable => {
            StabilizeOutcome::Stabilized { result: Sandpile(engine.values), odometer: Odometer(engine.odometer) }
        }
        EngineStop::AllToppled => {
            StabilizeOutcome::Unstabilizable { certificate: engine.odometer.iter().map(|&c| c > 0).collect() }
        }
    })
}

pub fn stabilize_with_holes(g: &MultiGraph, s: &Sandpile, holes: &[VertexId]) -> Result<HoleStabilization> {
    stabilize_with_holes_ordered(g, s, holes, TopplingOrder::Fifo)
}

pub fn stabilize_with_holes_ordered(
    g: &MultiGraph,
    s: &Sandpile,
    holes: &[VertexId],
    order: TopplingOrder,
) -> Result<HoleStabilization> {
    if holes.is_empty() {
        return Err(Error::PreconditionViolated("stabilization with holes needs at least one hole".into()));
    }
    let mut engine = Engine::new(g, s, holes)?;
    engine.run(order, false)?;
    Ok(HoleStabilization {
        result: Sandpile(engine.values),
        odometer: Odometer(engine.odometer),
        absorbed: engine.absorbed,
    })
}

/// Result of one closed-chain step `s ↦ a_i s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClosedStep {
    Stabilized(Sandpile),
    /// `s + δ_i` returned unchanged.
    Unstabilizable(Sandpile),
}

impl ClosedStep {
    pub fn into_sandpile(self) -> Sandpile {
        match self {
            ClosedStep::Stabilized(s) | ClosedStep::Unstabilizable(s) => s,
        }
    }
}

pub fn try_add_closed(g: &MultiGraph, s: &Sandpile, i: VertexId) -> Result<ClosedStep> {
    g.check_vertex(i)?;
    s.check_len(g)?;
    let mut next = s.clone();
    next.add_at(i, 1)?;
    Ok(match stabilize_sinkless(g, &next)? {
        StabilizeOutcome::Stabilized { result, .. } => ClosedStep::Stabilized(result),
        StabilizeOutcome::Unstabilizable { .. } => ClosedStep::Unstabilizable(next),
    })
}

/// The closed-chain addition operator `a_i`.
pub fn add_closed(g: &MultiGraph, s: &Sandpile, i: VertexId) -> Result<Sandpile> {
    try_add_closed(g, s, i).map(ClosedStep::into_sandpile)
}
