//! Closed and open chains, threshold sampling, and the exact limiting laws
//! of the threshold state.
//!
//! The reduced closed chain never stabilizes without a sink. It tracks the
//! decomposition `s_k = ρ_k + m_k·δ_z + Δv_k`: each step draws `i ~ α`,
//! moves `ρ ← â_i ρ` by table lookup and adds the burst `av_{i→z}(ρ)` to
//! `m`. The threshold is the first step with `m ≥ 0`.
//!
//! Both chain drivers consume exactly one uniform variate per step (the
//! vertex draw), so with the same stream they see the same drive sequence.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::decompose::{decompose, decompose_without_table, Decomposition};
use crate::error::{Error, Result};
use crate::graph::{MultiGraph, VertexId};
use crate::recurrent::{add_open, RecTable};
use crate::renewal::LengthChain;
use crate::replicas::{run_replicas, ReplicaRng};
use crate::sandpile::{stabilize_sinkless, try_add_closed, ClosedStep, Sandpile};
use crate::stats::{rational_to_f64, Histogram, MeanEstimate};
use crate::Rational;

/// Probability law `α` of the vertex receiving each added chip.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveDistribution {
    alpha: Vec<Rational>,
    cumulative: Vec<f64>,
}

impl DriveDistribution {
    /// Requires every `α_i > 0` and `Σα = 1`.
    pub fn new(alpha: Vec<Rational>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidDistribution("empty drive distribution".into()));
        }
        if let Some(i) = alpha.iter().position(|a| *a <= Rational::zero()) {
            return Err(Error::InvalidDistribution(format!("alpha[{i}] is not positive")));
        }
        let sum: Rational = alpha.iter().sum();
        if sum != Rational::one() {
            return Err(Error::InvalidDistribution(format!("alpha sums to {sum}")));
        }
        let mut acc = 0.0;
        let cumulative = alpha
            .iter()
            .map(|a| {
                acc += rational_to_f64(a);
                acc
            })
            .collect();
        Ok(DriveDistribution { alpha, cumulative })
    }

    pub fn uniform(n: usize) -> Self {
        Self::new(vec![Rational::new(1.into(), (n as i64).into()); n]).expect("n >= 1")
    }

    /// `α_i = w_i / Σw`.
    pub fn from_weights(weights: &[u64]) -> Result<Self> {
        let total: u64 = weights.iter().sum();
        if total == 0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|&w| Rational::new(w.into(), total.into())).collect())
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn prob(&self, i: VertexId) -> &Rational {
        &self.alpha[i]
    }

    pub fn probs(&self) -> &[Rational] {
        &self.alpha
    }

    /// One uniform variate per call.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VertexId {
        let u: f64 = rng.random();
        self.cumulative.partition_point(|&c| c <= u).min(self.alpha.len() - 1)
    }
}

/// Observables at the threshold time `τ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThresholdSample {
    /// `i_τ`; `None` when `τ = 0`.
    pub epicenter: Option<VertexId>,
    /// `i_{τ−1}`; `None` when `τ ≤ 1`.
    pub prev_epicenter: Option<VertexId>,
    /// Index of `ρ_τ = R_z(s_τ)` in the table.
    pub rho_index: usize,
    pub m_tau: i64,
    pub tau: u64,
    /// `|s_τ| = |ρ_τ| + m_τ`.
    pub s_tau_total: i64,
    /// Burst of the threshold avalanche, `av_{i_τ→z}(ρ_τ)`.
    pub burst: Option<u64>,
    /// Full threshold state (direct mode only).
    pub s_tau: Option<Sandpile>,
    /// `v_τ` of the decomposition (direct mode only).
    pub v_tau: Option<Vec<i64>>,
}

/// Closed chain driven through the open chain and the burst process.
#[derive(Debug, Clone)]
pub struct ReducedChain<'a> {
    table: &'a RecTable,
    alpha: &'a DriveDistribution,
    start: Decomposition,
}

impl<'a> ReducedChain<'a> {
    pub fn new(g: &MultiGraph, table: &'a RecTable, alpha: &'a DriveDistribution, s0: &Sandpile) -> Result<Self> {
        if alpha.n() != g.n() {
            return Err(Error::LengthMismatch { expected: g.n(), got: alpha.n() });
        }
        let start = decompose(g, s0, table.sink(), table)?;
        Ok(ReducedChain { table, alpha, start })
    }

    pub fn initial(&self) -> &Decomposition {
        &self.start
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> ThresholdSample {
        let t = self.table;
        let mut rho = self.start.rho_index.expect("decomposed against the table");
        let mut m = self.start.m;
        let mut tau = 0u64;
        let mut epicenter = None;
        let mut prev = None;
        let mut burst = None;
        while m < 0 {
            let i = self.alpha.sample(rng);
            rho = t.apply(i, rho);
            let b = t.recorded_burst(i, rho);
            m += i64::from(b);
            tau += 1;
            prev = epicenter;
            epicenter = Some(i);
            burst = Some(u64::from(b));
        }
        ThresholdSample {
            epicenter,
            prev_epicenter: prev,
            rho_index: rho,
            m_tau: m,
            tau,
            s_tau_total: t.total(rho) + m,
            burst,
            s_tau: None,
            v_tau: None,
        }
    }

    /// Trajectory of `m` after each step, up to and including `τ`.
    pub fn m_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i64> {
        let mut rho = self.start.rho_index.expect("decomposed against the table");
        let mut m = self.start.m;
        let mut out = vec![m];
        while m < 0 {
            let i = self.alpha.sample(rng);
            rho = self.table.apply(i, rho);
            m += i64::from(self.table.recorded_burst(i, rho));
            out.push(m);
        }
        out
    }
}

pub fn run_closed_reduced<R: Rng + ?Sized>(
    g: &MultiGraph,
    table: &RecTable,
    alpha: &DriveDistribution,
    s0: &Sandpile,
    rng: &mut R,
) -> Result<ThresholdSample> {
    Ok(ReducedChain::new(g, table, alpha, s0)?.run(rng))
}

/// Drives `a_i` directly with sinkless stabilization. The table (for sink
/// `z`) is only used to report `ρ_τ`.
pub fn run_closed_direct<R: Rng + ?Sized>(
    g: &MultiGraph,
    table: &RecTable,
    alpha: &DriveDistribution,
    s0: &Sandpile,
    rng: &mut R,
) -> Result<ThresholdSample> {
    let mut s = s0.clone();
    let mut tau = 0u64;
    let mut epicenter = None;
    let mut prev = None;
    if stabilize_sinkless(g, &s)?.is_stabilized() {
        loop {
            let i = alpha.sample(rng);
            tau += 1;
            prev = epicenter;
            epicenter = Some(i);
            match try_add_closed(g, &s, i)? {
                ClosedStep::Stabilized(next) => s = next,
                ClosedStep::Unstabilizable(next) => {
                    s = next;
                    break;
                }
            }
        }
    }
    let d = decompose(g, &s, table.sink(), table)?;
    let rho = d.rho_index.expect("decomposed against the table");
    let burst = epicenter.map(|i| table.burst_size(i, rho) as u64);
    Ok(ThresholdSample {
        epicenter,
        prev_epicenter: prev,
        rho_index: rho,
        m_tau: d.m,
        tau,
        s_tau_total: s.total()?,
        burst,
        s_tau: Some(s),
        v_tau: Some(d.v),
    })
}

/// Runs `replicas` reduced chains on per-replica streams of `seed`.
pub fn simulate_reduced(chain: &ReducedChain<'_>, replicas: u64, seed: u64) -> Result<Vec<ThresholdSample>> {
    run_replicas(replicas, seed, |_, rng: &mut ReplicaRng| Ok(chain.run(rng)))
}

pub fn simulate_direct(
    g: &MultiGraph,
    table: &RecTable,
    alpha: &DriveDistribution,
    s0: &Sandpile,
    replicas: u64,
    seed: u64,
) -> Result<Vec<ThresholdSample>> {
    run_replicas(replicas, seed, |_, rng| run_closed_direct(g, table, alpha, s0, rng))
}

/// Threshold observables from a chain run without an enumerated table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableFreeSample {
    pub epicenter: Option<VertexId>,
    pub rho_tau: Sandpile,
    pub m_tau: i64,
    pub tau: u64,
    pub s_tau_total: i64,
}

/// Reduced closed chain for graphs too large to enumerate: each step runs
/// the open-chain avalanche `â_i` directly.
#[derive(Debug, Clone)]
pub struct TableFreeChain<'a> {
    g: &'a MultiGraph,
    alpha: &'a DriveDistribution,
    start: Decomposition,
}

impl<'a> TableFreeChain<'a> {
    pub fn new(g: &'a MultiGraph, z: VertexId, alpha: &'a DriveDistribution, s0: &Sandpile) -> Result<Self> {
        if alpha.n() != g.n() {
            return Err(Error::LengthMismatch { expected: g.n(), got: alpha.n() });
        }
        let start = decompose_without_table(g, s0, z)?;
        Ok(TableFreeChain { g, alpha, start })
    }

    pub fn initial(&self) -> &Decomposition {
        &self.start
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TableFreeSample> {
        let mut rho = self.start.rho.clone();
        let mut m = self.start.m;
        let mut tau = 0u64;
        let mut epicenter = None;
        while m < 0 {
            let i = self.alpha.sample(rng);
            let (next, burst) = add_open(self.g, &rho, i)?;
            rho = next;
            m += burst as i64;
            tau += 1;
            epicenter = Some(i);
        }
        let s_tau_total = rho.config().total()? + m;
        Ok(TableFreeSample { epicenter, rho_tau: rho.into_sandpile(), m_tau: m, tau, s_tau_total })
    }

    pub fn simulate(&self, replicas: u64, seed: u64) -> Result<Vec<TableFreeSample>> {
        run_replicas(replicas, seed, |_, rng| self.run(rng))
    }

    /// Monte Carlo estimate of `ζ_τ(s_0)`.
    pub fn estimate_zeta_tau(&self, replicas: u64, seed: u64) -> Result<MeanEstimate> {
        let n = self.g.n() as f64;
        let values: Vec<f64> = self.simulate(replicas, seed)?.iter().map(|s| s.s_tau_total as f64 / n).collect();
        Ok(MeanEstimate::from_samples(&values))
    }
}

/// Limit law of `(i_τ, ρ_τ, m_τ)`: mass `α_i/κ` for `0 ≤ m < av_{i→z}(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    pub mass: BTreeMap<(VertexId, usize, u64), Rational>,
    pub n: usize,
    pub kappa: usize,
}

impl JointLaw {
    pub fn get(&self, i: VertexId, rho: usize, m: u64) -> Rational {
        self.mass.get(&(i, rho, m)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.mass.values().sum()
    }

    /// Marginal of `i_τ`.
    pub fn epicenter_law(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.n];
        for (&(i, _, _), p) in &self.mass {
            out[i] += p;
        }
        out
    }

    /// Marginal of `ρ_τ`.
    pub fn rho_law(&self) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.kappa];
        for (&(_, rho, _), p) in &self.mass {
            out[rho] += p;
        }
        out
    }

    /// Marginal of `(i_τ, ρ_τ)`.
    pub fn pair_law(&self) -> BTreeMap<(VertexId, usize), Rational> {
        let mut out: BTreeMap<(VertexId, usize), Rational> = BTreeMap::new();
        for (&(i, rho, _), p) in &self.mass {
            *out.entry((i, rho)).or_insert_with(Rational::zero) += p;
        }
        out
    }
}

fn kappa_rational(table: &RecTable) -> Rational {
    Rational::from_integer((table.kappa() as u64).into())
}

fn check_alpha(table: &RecTable, alpha: &DriveDistribution) -> Result<()> {
    if alpha.n() != table.n() {
        return Err(Error::LengthMismatch { expected: table.n(), got: alpha.n() });
    }
    Ok(())
}

pub fn theoretical_joint(table: &RecTable, alpha: &DriveDistribution) -> Result<JointLaw> {
    check_alpha(table, alpha)?;
    let kappa = kappa_rational(table);
    let mut mass = BTreeMap::new();
    for i in 0..table.n() {
        let w = alpha.prob(i) / &kappa;
        for rho in 0..table.kappa() {
            for m in 0..table.burst_size(i, rho).max(0) as u64 {
                mass.insert((i, rho, m), w.clone());
            }
        }
    }
    let law = JointLaw { mass, n: table.n(), kappa: table.kappa() };
    let total = law.total();
    if total != Rational::one() {
        return Err(Error::Inconsistent(format!("joint limit law sums to {total}")));
    }
    Ok(law)
}

/// `θ_z(ρ) = (1/κ) Σ_i α_i av_{i→z}(ρ)`.
pub fn theta_z(table: &RecTable, alpha: &DriveDistribution) -> Result<Vec<Rational>> {
    check_alpha(table, alpha)?;
    let kappa = kappa_rational(table);
    Ok((0..table.kappa())
        .map(|rho| {
            (0..table.n())
                .map(|i| alpha.prob(i) * Rational::from_integer(table.burst_size(i, rho).into()))
                .sum::<Rational>()
                / &kappa
        })
        .collect())
}

/// `Z = Σ_{i,i',ρ} (α_{i'} α_i / κ)·av_{i→z}(ρ)`, the mean stationary burst.
pub fn normalization_constant(table: &RecTable, alpha: &DriveDistribution) -> Result<Rational> {
    check_alpha(table, alpha)?;
    let kappa = kappa_rational(table);
    let mut z = Rational::zero();
    for i_prev in 0..table.n() {
        for i in 0..table.n() {
            let w = alpha.prob(i_prev) * alpha.prob(i) / &kappa;
            for rho in 0..table.kappa() {
                z += &w * Rational::from_integer(table.burst_size(i, rho).into());
            }
        }
    }
    Ok(z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstLaws {
    /// `p[b]`: stationary probability of burst size `b`.
    pub p: Vec<Rational>,
    /// `q[b] = b·p[b]`: limiting threshold-avalanche burst law.
    pub q_limit: Vec<Rational>,
}

pub fn burst_laws(table: &RecTable, alpha: &DriveDistribution) -> Result<BurstLaws> {
    check_alpha(table, alpha)?;
    let kappa = kappa_rational(table);
    let mut p: Vec<Rational> = Vec::new();
    for i in 0..table.n() {
        for eta in 0..table.kappa() {
            let b = table.burst_size(i, eta) as usize;
            if p.len() <= b {
                p.resize(b + 1, Rational::zero());
            }
            p[b] += alpha.prob(i) / &kappa;
        }
    }
    let q_limit: Vec<Rational> =
        p.iter().enumerate().map(|(b, pb)| pb * Rational::from_integer((b as u64).into())).collect();
    let mean: Rational = q_limit.iter().sum();
    if mean != Rational::one() {
        return Err(Error::Inconsistent(format!("mean stationary burst is {mean}")));
    }
    Ok(BurstLaws { p, q_limit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityLaws {
    /// `(1/κ)·#{ρ : |ρ| = n}`, the limiting law of `|s_τ|`.
    pub s_tau_law: BTreeMap<i64, Rational>,
    /// Stationary density `(1/κ) Σ |ρ| / #V`.
    pub zeta_s: Rational,
}

pub fn density_laws(table: &RecTable) -> DensityLaws {
    let kappa = kappa_rational(table);
    let mut s_tau_law: BTreeMap<i64, Rational> = BTreeMap::new();
    for rho in 0..table.kappa() {
        *s_tau_law.entry(table.total(rho)).or_insert_with(Rational::zero) += Rational::one() / &kappa;
    }
    let mean: Rational = s_tau_law.iter().map(|(&n, p)| p * Rational::from_integer(n.into())).sum();
    let zeta_s = mean / Rational::from_integer((table.n() as u64).into());
    DensityLaws { s_tau_law, zeta_s }
}

/// Limiting law of `(i_τ, R_{i_τ}(s_τ))`: flat `α_i/κ` over `Rec(i)`.
pub fn sink_at_epicenter_limit(alpha: &DriveDistribution, kappa: usize) -> BTreeMap<(VertexId, usize), Rational> {
    let k = Rational::from_integer((kappa as u64).into());
    (0..alpha.n())
        .flat_map(|i| (0..kappa).map(move |rho| (i, rho)))
        .map(|(i, rho)| ((i, rho), alpha.prob(i) / &k))
        .collect()
}

/// Empirical law of `(i_τ, R_{i_τ}(s_τ))` from direct-mode samples.
/// `tables[i]` must be enumerated with sink `i`. Samples with `τ = 0` are
/// skipped.
pub fn sink_at_epicenter_law(
    g: &MultiGraph,
    samples: &[ThresholdSample],
    tables: &[RecTable],
) -> Result<Histogram<(VertexId, usize)>> {
    let mut h = Histogram::new();
    for s in samples {
        let (Some(i), Some(state)) = (s.epicenter, s.s_tau.as_ref()) else {
            if s.s_tau.is_none() {
                return Err(Error::PreconditionViolated("sink-at-epicenter law needs direct-mode samples".into()));
            }
            continue;
        };
        let table = tables
            .get(i)
            .filter(|t| t.sink() == i)
            .ok_or_else(|| Error::PreconditionViolated(format!("no table with sink {i}")))?;
        let d = decompose(g, state, i, table)?;
        h.add((i, d.rho_index.expect("table supplied")));
    }
    Ok(h)
}

/// Monte Carlo estimate of `ζ_τ(s_0) = E|s_τ|/#V` from reduced runs.
pub fn estimate_zeta_tau(chain: &ReducedChain<'_>, replicas: u64, seed: u64) -> Result<MeanEstimate> {
    let n = chain.table.n() as f64;
    let samples = simulate_reduced(chain, replicas, seed)?;
    let values: Vec<f64> = samples.iter().map(|s| s.s_tau_total as f64 / n).collect();
    Ok(MeanEstimate::from_samples(&values))
}

/// Runs the open chain for `steps` additions from state `start`.
pub fn run_open<R: Rng + ?Sized>(
    table: &RecTable,
    alpha: &DriveDistribution,
    start: usize,
    steps: u64,
    rng: &mut R,
) -> usize {
    (0..steps).fold(start, |rho, _| table.apply(alpha.sample(rng), rho))
}

/// The chain `X_k = (i_k, ρ_k)` with length `av_{i→z}(ρ)` on the edge into
/// `(i, ρ)`. State `(i, ρ)` has index `i·κ + ρ`.
pub fn epicenter_state_chain(table: &RecTable, alpha: &DriveDistribution) -> Result<LengthChain> {
    check_alpha(table, alpha)?;
    let kappa = table.kappa();
    let mut edges = Vec::new();
    for i_prev in 0..table.n() {
        for rho_prev in 0..kappa {
            for i in 0..table.n() {
                let rho = table.apply(i, rho_prev);
                edges.push((
                    i_prev * kappa + rho_prev,
                    i * kappa + rho,
                    alpha.prob(i).clone(),
                    table.burst_size(i, rho) as u64,
                ));
            }
        }
    }
    LengthChain::new(table.n() * kappa, edges)
}
