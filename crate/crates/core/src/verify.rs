//! Named invariant suites, runnable against any small graph.
//!
//! Each check counts passing and failing cases and keeps the first failure
//! for the report. Suites never panic on a violated invariant; library
//! errors inside a case are recorded as failures of that check.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::chains::{
    burst_laws, density_laws, normalization_constant, run_closed_direct, run_closed_reduced, theoretical_joint,
    theta_z, DriveDistribution,
};
use crate::decompose::decompose;
use crate::error::{Error, Result};
use crate::graph::MultiGraph;
use crate::recurrent::RecTable;
use crate::renewal::{crossing_limit, limit_law, random_chain, stationary_exact, watched_chain, LengthChain};
use crate::replicas::replica_rng;
use crate::sandpile::{
    stabilize_sinkless, stabilize_sinkless_ordered, stabilize_with_holes, stabilize_with_holes_ordered, Sandpile,
    StabilizeOutcome, TopplingOrder,
};
use crate::waves::{
    enumerate_forests, refined_limit_law, toppling_set_law, wave_counts, WaveTable, MAX_FOREST_VERTICES,
};
use crate::Rational;

/// Tables larger than this are not enumerated by the suites.
pub const SUITE_KAPPA_CAP: usize = 50_000;
/// Exhaustive stabilizability sweeps are replaced by sampling above this size.
const EXHAUSTIVE_LIMIT: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Core,
    Decompose,
    Chains,
    Waves,
    Renewal,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["core", "decompose", "chains", "waves", "renewal", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "core" => Suite::Core,
            "decompose" => Suite::Decompose,
            "chains" => Suite::Chains,
            "waves" => Suite::Waves,
            "renewal" => Suite::Renewal,
            "all" => Suite::All,
            _ => return Err(Error::PreconditionViolated(format!("unknown suite `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: u64,
    pub failed: u64,
    pub first_failure: Option<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        CheckResult { name, passed: 0, failed: 0, first_failure: None }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            self.first_failure.get_or_insert_with(detail);
        }
    }

    /// Records `Ok(true)` as a pass and anything else as a failure.
    fn record_result(&mut self, r: Result<bool>, detail: impl FnOnce() -> String) {
        match r {
            Ok(ok) => self.record(ok, detail),
            Err(e) => self.record(false, || format!("{}: {e}", detail())),
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    /// Checks that could not run on this input, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(CheckResult::ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.ok())
    }

    fn skip(&mut self, name: &str, why: impl fmt::Display) {
        self.skipped.push((name.to_string(), why.to_string()));
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.ok() { "ok" } else { "FAILED" };
            writeln!(f, "{:<32} {status:>6}  passed {:>7}  failed {}", c.name, c.passed, c.failed)?;
            if let Some(why) = &c.first_failure {
                writeln!(f, "    first failure: {why}")?;
            }
        }
        for (name, why) in &self.skipped {
            writeln!(f, "{name:<32} skipped: {why}")?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, g: &MultiGraph, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    let suites: &[Suite] = match suite {
        Suite::All => &[Suite::Core, Suite::Decompose, Suite::Chains, Suite::Waves, Suite::Renewal],
        _ => std::slice::from_ref(&suite),
    };
    for &s in suites {
        match s {
            Suite::Core => core_suite(g, seed, &mut report)?,
            Suite::Decompose => decompose_suite(g, seed, &mut report)?,
            Suite::Chains => chains_suite(g, seed, &mut report)?,
            Suite::Waves => waves_suite(g, &mut report)?,
            Suite::Renewal => renewal_suite(seed, &mut report)?,
            Suite::All => unreachable!(),
        }
    }
    Ok(report)
}

fn tables(g: &MultiGraph) -> Result<Option<Vec<RecTable>>> {
    match (0..g.n()).map(|z| RecTable::enumerate_with_cap(g, z, SUITE_KAPPA_CAP)).collect::<Result<Vec<_>>>() {
        Ok(t) => Ok(Some(t)),
        Err(Error::CapExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn random_config<R: Rng + ?Sized>(g: &MultiGraph, lo: i64, hi_factor: i64, rng: &mut R) -> Sandpile {
    Sandpile::new((0..g.n()).map(|v| rng.random_range(lo..=hi_factor * g.deg(v))).collect())
}

fn core_suite(g: &MultiGraph, seed: u64, report: &mut SuiteReport) -> Result<()> {
    let mut rng = replica_rng(seed, 0);
    let mut abelian = CheckResult::new("abelian_property");
    let mut conservation = CheckResult::new("chip_conservation");
    for trial in 0..100u64 {
        let s = random_config(g, 0, 3, &mut rng);
        let z = trial as usize % g.n();
        let fifo = stabilize_with_holes(g, &s, &[z])?;
        let random = stabilize_with_holes_ordered(g, &s, &[z], TopplingOrder::Random(seed ^ trial))?;
        abelian.record(fifo == random, || format!("hole {z} on {s}"));
        let after = fifo.result.total()? + fifo.absorbed.iter().sum::<i64>();
        conservation.record(after == s.total()?, || format!("hole {z} on {s}"));

        let sl = random_config(g, -1, 1, &mut rng);
        let a = stabilize_sinkless(g, &sl)?;
        let b = stabilize_sinkless_ordered(g, &sl, TopplingOrder::Random(seed ^ trial))?;
        let agree = match (&a, &b) {
            (StabilizeOutcome::Stabilized { .. }, StabilizeOutcome::Stabilized { .. }) => a == b,
            (StabilizeOutcome::Unstabilizable { .. }, StabilizeOutcome::Unstabilizable { .. }) => true,
            _ => false,
        };
        abelian.record(agree, || format!("sinkless on {sl}"));
        if let StabilizeOutcome::Stabilized { result, .. } = &a {
            conservation.record(result.total()? == sl.total()?, || format!("sinkless on {sl}"));
        }
    }

    let mut matrix_tree = CheckResult::new("matrix_tree_sink_independent");
    let k0 = g.spanning_tree_count(0)?;
    for z in 0..g.n() {
        let k = g.spanning_tree_count(z)?;
        matrix_tree.record(k == k0, || format!("κ({z}) = {k} but κ(0) = {k0}"));
    }
    report.checks.extend([abelian, conservation, matrix_tree]);

    let Some(tables) = tables(g)? else {
        report.skip("burning_fixed_point", format!("κ exceeds {SUITE_KAPPA_CAP}"));
        return Ok(());
    };
    let mut size = CheckResult::new("rec_size_equals_kappa");
    let mut burning = CheckResult::new("burning_fixed_point");
    for t in &tables {
        let z = t.sink();
        size.record(t.kappa() as u128 == k0, || format!("|Rec({z})| = {}", t.kappa()));
        let fire = g.laplacian_apply(&Sandpile::delta(g.n(), z).into_values())?;
        for rho in t.states() {
            let run = stabilize_with_holes(g, &rho.checked_add(&fire)?, &[z])?;
            let mut result = run.result;
            result.values_mut()[z] = g.deg(z);
            let ones = (0..g.n()).all(|v| v == z || run.odometer.counts()[v] == 1);
            burning.record(ones && result == *rho, || format!("{rho} with sink {z}"));
        }
    }
    report.checks.extend([size, burning]);
    Ok(())
}

fn decompose_suite(g: &MultiGraph, seed: u64, report: &mut SuiteReport) -> Result<()> {
    let z = g.n() - 1;
    let t = match RecTable::enumerate_with_cap(g, z, SUITE_KAPPA_CAP) {
        Ok(t) => t,
        Err(Error::CapExceeded { .. }) => {
            report.skip("decompose", format!("κ exceeds {SUITE_KAPPA_CAP}"));
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let mut criterion = CheckResult::new("stabilizable_iff_m_negative");
    let mut reconstruct = CheckResult::new("decomposition_reconstructs");
    let mut lattice = CheckResult::new("lattice_invariance");
    let mut rng = replica_rng(seed, 1);

    let mut case = |s: &Sandpile, rng: &mut crate::replicas::ReplicaRng| {
        let d = decompose(g, s, z, &t);
        let direct = stabilize_sinkless(g, s).map(|o| o.is_stabilized());
        match (&d, direct) {
            (Ok(d), Ok(direct)) => {
                criterion.record(d.is_stabilizable() == direct, || format!("{s}"));
                reconstruct.record_result(d.reconstruct(g).map(|r| r == *s && d.v[z] == 0), || format!("{s}"));
                let w: Vec<i64> = (0..g.n()).map(|_| rng.random_range(-3..=3)).collect();
                let shifted = g.laplacian_apply(&w).and_then(|lw| s.checked_add(&lw));
                lattice.record_result(
                    shifted.and_then(|s2| decompose(g, &s2, z, &t)).map(|d2| d2.rho == d.rho && d2.m == d.m),
                    || format!("{s} shifted by Δ{w:?}"),
                );
            }
            (Err(e), _) => criterion.record(false, || format!("{s}: {e}")),
            (_, Err(e)) => criterion.record(false, || format!("{s}: {e}")),
        }
    };

    let span: u64 =
        (0..g.n()).map(|v| (g.deg(v) + 4) as u64).try_fold(1u64, |a, b| a.checked_mul(b)).unwrap_or(u64::MAX);
    if span <= EXHAUSTIVE_LIMIT {
        let mut s: Vec<i64> = vec![-3; g.n()];
        'sweep: loop {
            case(&Sandpile::new(s.clone()), &mut rng);
            for (v, x) in s.iter_mut().enumerate() {
                if *x < g.deg(v) {
                    *x += 1;
                    continue 'sweep;
                }
                *x = -3;
            }
            break;
        }
    } else {
        for _ in 0..2000 {
            let s = random_config(g, -3, 1, &mut rng);
            case(&s, &mut rng);
        }
    }
    report.checks.extend([criterion, reconstruct, lattice]);
    Ok(())
}

fn chains_suite(g: &MultiGraph, seed: u64, report: &mut SuiteReport) -> Result<()> {
    let Some(tables) = tables(g)? else {
        report.skip("chains", format!("κ exceeds {SUITE_KAPPA_CAP}"));
        return Ok(());
    };
    let alphas =
        [DriveDistribution::uniform(g.n()), DriveDistribution::from_weights(&(1..=g.n() as u64).collect::<Vec<_>>())?];
    let mut norm = CheckResult::new("normalization_z_is_one");
    let mut sums = CheckResult::new("burst_sum_equals_kappa");
    let mut marginals = CheckResult::new("joint_marginals");
    let mut mean_burst = CheckResult::new("mean_stationary_burst_one");
    let mut recorded = CheckResult::new("recorded_burst_matches_formula");
    for t in &tables {
        let z = t.sink();
        let kappa = t.kappa() as i64;
        for i in 0..g.n() {
            let total: i64 = (0..t.kappa()).map(|r| t.burst_size(i, r)).sum();
            sums.record(total == kappa, || format!("i = {i}, z = {z}: Σ av = {total}"));
            for r in 0..t.kappa() {
                recorded.record(i64::from(t.recorded_burst(i, r)) == t.burst_size(i, r), || {
                    format!("i = {i}, z = {z}, state {r}")
                });
            }
        }
        for alpha in &alphas {
            norm.record_result(normalization_constant(t, alpha).map(|c| c == Rational::one()), || format!("z = {z}"));
            let joint = theoretical_joint(t, alpha)
                .and_then(|j| Ok((j.epicenter_law() == alpha.probs(), j.rho_law() == theta_z(t, alpha)?)));
            marginals.record_result(joint.map(|(a, b)| a && b), || format!("z = {z}"));
            mean_burst.record_result(burst_laws(t, alpha).map(|_| true), || format!("z = {z}"));
        }
    }
    let mut sink_free = CheckResult::new("s_tau_law_sink_independent");
    let reference = density_laws(&tables[0]);
    for t in &tables[1..] {
        sink_free.record(density_laws(t) == reference, || format!("z = {}", t.sink()));
    }

    let mut oracle = CheckResult::new("direct_matches_reduced");
    let t = &tables[g.n() - 1];
    let s0 = Sandpile::constant(g.n(), -2);
    for r in 0..100 {
        let a = run_closed_reduced(g, t, &alphas[1], &s0, &mut replica_rng(seed, r));
        let b = run_closed_direct(g, t, &alphas[1], &s0, &mut replica_rng(seed, r));
        let ok = match (a, b) {
            (Ok(a), Ok(b)) => (a.epicenter, a.tau, a.s_tau_total) == (b.epicenter, b.tau, b.s_tau_total),
            _ => false,
        };
        oracle.record(ok, || format!("replica {r}"));
    }
    report.checks.extend([norm, sums, marginals, mean_burst, recorded, sink_free, oracle]);
    Ok(())
}

fn waves_suite(g: &MultiGraph, report: &mut SuiteReport) -> Result<()> {
    if !g.is_bidirected() {
        report.skip("waves", "graph is directed");
        return Ok(());
    }
    if g.n() > MAX_FOREST_VERTICES {
        report.skip("waves", format!("more than {MAX_FOREST_VERTICES} vertices"));
        return Ok(());
    }
    let Some(tables) = tables(g)? else {
        report.skip("waves", format!("κ exceeds {SUITE_KAPPA_CAP}"));
        return Ok(());
    };
    let mut table1 = CheckResult::new("wave_counts_match_forests");
    let mut concat = CheckResult::new("waves_concatenate_to_avalanche");
    let mut laws = CheckResult::new("wave_limit_laws_normalized");
    let alpha = DriveDistribution::uniform(g.n());
    for t in &tables {
        let z = t.sink();
        for i in (0..g.n()).filter(|&i| i != z) {
            let both = wave_counts(g, t, i).and_then(|d| Ok(d == enumerate_forests(g, i, z)?));
            table1.record_result(both, || format!("i = {i}, z = {z}"));
        }
        match WaveTable::build(g, t) {
            Ok(w) => {
                concat.record(true, String::new);
                laws.record_result(refined_limit_law(t, &w, &alpha).map(|_| true), || format!("z = {z}"));
            }
            Err(e) => concat.record(false, || format!("z = {z}: {e}")),
        }
        laws.record_result(toppling_set_law(g, z, &alpha).map(|_| true), || format!("z = {z}"));
    }
    report.checks.extend([table1, concat, laws]);
    Ok(())
}

/// `P(a,a) = 1/2, P(a,b) = 1/2, P(b,a) = 1` with lengths 1, 1, 2.
pub fn example_chain() -> LengthChain {
    let half = Rational::new(1.into(), 2.into());
    LengthChain::new(2, vec![(0, 0, half.clone(), 1), (0, 1, half, 1), (1, 0, Rational::one(), 2)])
        .expect("valid example chain")
}

fn renewal_suite(seed: u64, report: &mut SuiteReport) -> Result<()> {
    let mut example = CheckResult::new("example_limit_masses");
    let law = limit_law(&example_chain())?;
    let quarter = Rational::new(1.into(), 4.into());
    let expect = [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 0, 1)];
    example
        .record(expect.iter().all(|&(x, y, m)| law.get(x, y, m) == quarter) && law.total() == Rational::one(), || {
            format!("{:?}", law.mass)
        });

    let mut crossing = CheckResult::new("crossing_limit_two_routes");
    let mut watched = CheckResult::new("watched_chain_stationarity");
    let mut normalized = CheckResult::new("limit_law_sums_to_one");
    let mut rng = replica_rng(seed, 2);
    for trial in 0..50 {
        let k = rng.random_range(2..=8);
        let chain = random_chain(k, 3, &mut rng)?;
        if let Ok(law) = limit_law(&chain) {
            normalized.record(law.total() == Rational::one(), || format!("trial {trial}"));
        }
        let (x, y) = (0, 1 + rng.random_range(0..k - 1));
        if chain.prob(x, y) + chain.prob(y, x) > Rational::zero() {
            crossing.record_result(crossing_limit(&chain, x, y).map(|_| true), || format!("trial {trial}"));
        }
        let subset: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).chain([0]).collect();
        let check = (|| -> Result<bool> {
            let pi = stationary_exact(&chain)?;
            let (w, states) = watched_chain(&chain, &subset)?;
            let pw = stationary_exact(&w)?;
            let mass: Rational = states.iter().map(|&s| pi[s].clone()).sum();
            Ok(states.iter().zip(&pw).all(|(&s, p)| crate::stats::rational_to_f64(&(&pi[s] / &mass - p)).abs() < 1e-10))
        })();
        watched.record_result(check, || format!("trial {trial}, subset {subset:?}"));
    }
    report.checks.extend([example, crossing, watched, normalized]);
    Ok(())
}
