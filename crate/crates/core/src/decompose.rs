//! The `z`-recurrent decomposition `s = ρ + m·δ_z + Δv`, with `ρ ∈ Rec(z)`
//! and `v(z) = 0`. A sandpile is stabilizable iff `m < 0`.
//!
//! Construction keeps the identity `s = σ + c·δ_z + Δv` exact at every step
//! while the working configuration `σ` is driven into `Rec(z)`:
//!
//! 1. Lift: stabilize `deg − 1 − σ` with `z` as a hole and reflect back.
//!    This pushes every non-sink value to `≥ 0`.
//! 2. Stabilize off `z`, then pin `σ(z) = deg(z)`.
//! 3. Fire the sink and stabilize off `z`, repeatedly, until the burning
//!    test passes. The fixed point is `ρ`.

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, VertexId};
use crate::recurrent::{RecTable, RecurrentState};
use crate::sandpile::{stabilize_with_holes, Sandpile};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub rho: RecurrentState,
    pub m: i64,
    /// Normalized so that `v(z) = 0`.
    pub v: Vec<i64>,
    /// Index of `ρ` in the table, when one was supplied.
    pub rho_index: Option<usize>,
}

impl Decomposition {
    /// `ρ + m·δ_z + Δv`.
    pub fn reconstruct(&self, g: &MultiGraph) -> Result<Sandpile> {
        let mut s = self.rho.config().checked_add(&g.laplacian_apply(&self.v)?)?;
        s.add_at(self.rho.sink(), self.m)?;
        Ok(s)
    }

    pub fn is_stabilizable(&self) -> bool {
        self.m < 0
    }
}

struct Tracker<'g> {
    g: &'g MultiGraph,
    z: VertexId,
    sigma: Sandpile,
    c: i64,
    v: Vec<i64>,
}

fn ovf() -> Error {
    Error::Overflow("decomposition")
}

impl Tracker<'_> {
    fn add_v(&mut self, delta: &[i64], sign: i64) -> Result<()> {
        for (x, &d) in self.v.iter_mut().zip(delta) {
            *x = d.checked_mul(sign).and_then(|d| x.checked_add(d)).ok_or_else(ovf)?;
        }
        Ok(())
    }

    fn add_c(&mut self, amount: i64) -> Result<()> {
        self.c = self.c.checked_add(amount).ok_or_else(ovf)?;
        Ok(())
    }

    fn lift(&mut self) -> Result<()> {
        let g = self.g;
        let dual: Vec<i64> = (0..g.n())
            .map(|i| (g.deg(i) - 1).checked_sub(self.sigma.values()[i]).ok_or_else(ovf))
            .collect::<Result<_>>()?;
        let run = stabilize_with_holes(g, &Sandpile::new(dual), &[self.z])?;
        // σ = σ' + Δu − A·δ_z with σ' = deg − 1 − result.
        let lifted: Vec<i64> = (0..g.n())
            .map(|i| (g.deg(i) - 1).checked_sub(run.result.values()[i]).ok_or_else(ovf))
            .collect::<Result<_>>()?;
        self.sigma = Sandpile::new(lifted);
        self.add_v(&run.odometer.as_signed()?, 1)?;
        self.add_c(-run.absorbed[self.z])
    }

    /// Stabilizes `σ + fire·Δδ_z` off the sink and pins `σ(z) = deg(z)`.
    /// Returns the odometer of the stabilization.
    fn settle(&mut self, fire: bool) -> Result<Vec<i64>> {
        let g = self.g;
        let z = self.z;
        let mut start = self.sigma.clone();
        if fire {
            start = start.checked_add(&g.laplacian_apply(&Sandpile::delta(g.n(), z).into_values())?)?;
        }
        let run = stabilize_with_holes(g, &start, &[z])?;
        let odo = run.odometer.as_signed()?;
        // σ = r − Δ(u + fire·δ_z) + A·δ_z
        let mut total_fire = odo.clone();
        if fire {
            total_fire[z] += 1;
        }
        self.add_v(&total_fire, -1)?;
        self.add_c(run.absorbed[z])?;
        self.sigma = run.result;
        let excess = self.sigma.values()[z].checked_sub(g.deg(z)).ok_or_else(ovf)?;
        self.add_c(excess)?;
        self.sigma.values_mut()[z] = g.deg(z);
        Ok(odo)
    }
}

fn decompose_core(g: &MultiGraph, s: &Sandpile, z: VertexId, max_rounds: u64) -> Result<Decomposition> {
    g.check_vertex(z)?;
    s.check_len(g)?;
    let mut t = Tracker { g, z, sigma: s.clone(), c: 0, v: vec![0; g.n()] };
    t.lift()?;
    t.settle(false)?;

    let mut rounds = 0u64;
    loop {
        let before = t.sigma.clone();
        let odo = t.settle(true)?;
        if (0..g.n()).all(|i| i == z || odo[i] == 1) {
            if t.sigma != before {
                return Err(Error::Inconsistent(format!("burning test passed on {before} but returned {}", t.sigma)));
            }
            break;
        }
        rounds += 1;
        if rounds > max_rounds {
            return Err(Error::NonTermination(max_rounds));
        }
    }

    let shift = t.v[z];
    for x in t.v.iter_mut() {
        *x = x.checked_sub(shift).ok_or_else(ovf)?;
    }
    let m = s.total()?.checked_sub(t.sigma.total()?).ok_or_else(ovf)?;
    if m != t.c {
        return Err(Error::Inconsistent(format!("sink bookkeeping {} disagrees with |s| − |ρ| = {m}", t.c)));
    }
    let d = Decomposition { rho: RecurrentState::new_unchecked(t.sigma, z), m, v: t.v, rho_index: None };
    if d.reconstruct(g)? != *s {
        return Err(Error::Inconsistent(format!("decomposition of {s} does not reconstruct")));
    }
    Ok(d)
}

/// Decomposition checked against an enumerated table; `ρ` must be one of
/// its states.
pub fn decompose(g: &MultiGraph, s: &Sandpile, z: VertexId, table: &RecTable) -> Result<Decomposition> {
    if table.sink() != z || table.n() != g.n() {
        return Err(Error::PreconditionViolated(format!(
            "table was enumerated for sink {} on {} vertices",
            table.sink(),
            table.n()
        )));
    }
    let bound = 4u64.saturating_mul(table.kappa() as u64).saturating_mul(g.n() as u64);
    let mut d = decompose_core(g, s, z, bound)?;
    let idx = table
        .index_of(d.rho.values())
        .ok_or_else(|| Error::Inconsistent(format!("{} is not in the enumerated Rec({z})", d.rho.config())))?;
    d.rho_index = Some(idx);
    Ok(d)
}

/// Table-free decomposition for graphs whose `κ` is too large to enumerate.
/// The round guard uses the matrix-tree count, saturating on overflow.
pub fn decompose_without_table(g: &MultiGraph, s: &Sandpile, z: VertexId) -> Result<Decomposition> {
    let kappa = g.spanning_tree_count(z).map(|k| k.min(u64::MAX as u128) as u64).unwrap_or(u64::MAX);
    let bound = 4u64.saturating_mul(kappa).saturating_mul(g.n() as u64);
    decompose_core(g, s, z, bound)
}

/// `R_z(s)`.
pub fn recurrent_rep(g: &MultiGraph, s: &Sandpile, z: VertexId, table: &RecTable) -> Result<RecurrentState> {
    decompose(g, s, z, table).map(|d| d.rho)
}

/// `s` is stabilizable iff the `m` of its decomposition is negative.
pub fn is_stabilizable(g: &MultiGraph, s: &Sandpile, z: VertexId, table: &RecTable) -> Result<bool> {
    decompose(g, s, z, table).map(|d| d.m < 0)
}
