//! Finite Markov chains whose edges carry nonnegative integer lengths, and
//! the finish-line law of the renewal theorem: after the accumulated length
//! first reaches `n`, the finishing edge `(x, y)` and overshoot `m` converge
//! to `π(x)P(x,y)/Z` for `0 ≤ m < ℓ(x,y)`, with `Z = Σ π(x)P(x,y)ℓ(x,y)`.
//!
//! Probabilities are exact rationals. Stationary laws are solved exactly up
//! to [`EXACT_STATIONARY_LIMIT`] states and by power iteration above.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::rational_to_f64;
use crate::Rational;

pub type StateId = usize;

pub const EXACT_STATIONARY_LIMIT: usize = 200;
const POWER_TOLERANCE: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub to: StateId,
    pub prob: Rational,
    pub length: u64,
}

/// Irreducible finite chain with edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthChain {
    rows: Vec<Vec<Transition>>,
    /// Cumulative f64 row sums for sampling.
    cumulative: Vec<Vec<f64>>,
}

impl LengthChain {
    /// `edges` are `(x, y, P(x,y), ℓ(x,y))` with `P > 0`; each row must sum
    /// to exactly one and each ordered pair may appear once.
    pub fn new(k: usize, edges: Vec<(StateId, StateId, Rational, u64)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDistribution("chain has no states".into()));
        }
        let mut rows: Vec<Vec<Transition>> = vec![Vec::new(); k];
        let mut seen = BTreeSet::new();
        for (x, y, prob, length) in edges {
            for s in [x, y] {
                if s >= k {
                    return Err(Error::VertexOutOfRange { vertex: s, n: k });
                }
            }
            if prob <= Rational::zero() || prob > Rational::one() {
                return Err(Error::InvalidDistribution(format!("P({x},{y}) = {prob} is not in (0, 1]")));
            }
            if !seen.insert((x, y)) {
                return Err(Error::InvalidDistribution(format!("duplicate edge ({x},{y})")));
            }
            rows[x].push(Transition { to: y, prob, length });
        }
        for (x, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|t| t.to);
            let sum: Rational = row.iter().map(|t| t.prob.clone()).sum();
            if sum != Rational::one() {
                return Err(Error::InvalidDistribution(format!("row {x} sums to {sum}")));
            }
        }
        let cumulative = rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .map(|t| {
                        acc += rational_to_f64(&t.prob);
                        acc
                    })
                    .collect()
            })
            .collect();
        let chain = LengthChain { rows, cumulative };
        if !chain.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        Ok(chain)
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, x: StateId) -> &[Transition] {
        &self.rows[x]
    }

    pub fn prob(&self, x: StateId, y: StateId) -> Rational {
        self.find(x, y).map(|t| t.prob.clone()).unwrap_or_else(Rational::zero)
    }

    pub fn length(&self, x: StateId, y: StateId) -> Option<u64> {
        self.find(x, y).map(|t| t.length)
    }

    fn find(&self, x: StateId, y: StateId) -> Option<&Transition> {
        self.rows[x].binary_search_by_key(&y, |t| t.to).ok().map(|k| &self.rows[x][k])
    }

    /// Same transition probabilities with a new length function.
    pub fn with_lengths(&self, mut length: impl FnMut(StateId, StateId) -> u64) -> LengthChain {
        let mut out = self.clone();
        for (x, row) in out.rows.iter_mut().enumerate() {
            for t in row.iter_mut() {
                t.length = length(x, t.to);
            }
        }
        out
    }

    fn is_irreducible(&self) -> bool {
        let k = self.k();
        let reach = |adj: &dyn Fn(StateId) -> Vec<StateId>| {
            let mut seen = vec![false; k];
            seen[0] = true;
            let mut queue = VecDeque::from([0]);
            let mut count = 1;
            while let Some(x) = queue.pop_front() {
                for y in adj(x) {
                    if !seen[y] {
                        seen[y] = true;
                        count += 1;
                        queue.push_back(y);
                    }
                }
            }
            count == k
        };
        let mut rev = vec![Vec::new(); k];
        for (x, row) in self.rows.iter().enumerate() {
            for t in row {
                rev[t.to].push(x);
            }
        }
        reach(&|x| self.rows[x].iter().map(|t| t.to).collect()) && reach(&|x| rev[x].clone())
    }

    /// Draws the next state with a single uniform variate.
    pub fn step<R: Rng + ?Sized>(&self, x: StateId, rng: &mut R) -> StateId {
        let u: f64 = rng.random();
        let cum = &self.cumulative[x];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.rows[x][k].to
    }
}

/// Solves `A·X = B` exactly; `A` must be square and nonsingular.
fn solve_rational(mut a: Vec<Vec<Rational>>, mut b: Vec<Vec<Rational>>) -> Result<Vec<Vec<Rational>>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Inconsistent("singular linear system".into()))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = Rational::one() / a[col][col].clone();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        for x in b[col].iter_mut() {
            *x *= &inv;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            let (pivot_a, pivot_b) = (a[col].clone(), b[col].clone());
            for (x, p) in a[r].iter_mut().zip(&pivot_a).skip(col) {
                *x -= &factor * p;
            }
            for (x, p) in b[r].iter_mut().zip(&pivot_b) {
                *x -= &factor * p;
            }
        }
    }
    Ok(b)
}

/// Exact stationary law: solves `πP = π` with one balance equation replaced
/// by `Σπ = 1`.
pub fn stationary_exact(chain: &LengthChain) -> Result<Vec<Rational>> {
    let k = chain.k();
    // Row j of the system: Σ_x π(x)(P(x,j) − 1{x=j}) = 0.
    let mut a = vec![vec![Rational::zero(); k]; k];
    for (x, row) in chain.rows.iter().enumerate() {
        for t in row {
            a[t.to][x] += &t.prob;
        }
        a[x][x] -= Rational::one();
    }
    a[k - 1] = vec![Rational::one(); k];
    let mut b = vec![vec![Rational::zero()]; k];
    b[k - 1][0] = Rational::one();
    Ok(solve_rational(a, b)?.into_iter().map(|mut r| r.remove(0)).collect())
}

/// Stationary law in floating point: exact solve for small chains, power
/// iteration on the lazy chain `(I + P)/2` above the exact limit.
pub fn stationary(chain: &LengthChain) -> Result<Vec<f64>> {
    if chain.k() <= EXACT_STATIONARY_LIMIT {
        return Ok(stationary_exact(chain)?.iter().map(rational_to_f64).collect());
    }
    let k = chain.k();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..POWER_MAX_ITERS {
        let mut next: Vec<f64> = pi.iter().map(|p| 0.5 * p).collect();
        for (x, row) in chain.rows.iter().enumerate() {
            for t in row {
                next[t.to] += 0.5 * pi[x] * rational_to_f64(&t.prob);
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < POWER_TOLERANCE {
            break;
        }
    }
    Ok(pi)
}

/// gcd of the total lengths of all closed walks; zero when every closed
/// walk has length zero.
pub fn aperiodicity_gcd(chain: &LengthChain) -> u64 {
    // Potentials along a BFS tree: every closed-walk length is a sum of edge
    // discrepancies φ(x) + ℓ(x,y) − φ(y), and each discrepancy is the
    // difference of two closed-walk lengths.
    let k = chain.k();
    let mut phi: Vec<Option<i128>> = vec![None; k];
    phi[0] = Some(0);
    let mut queue = VecDeque::from([0]);
    while let Some(x) = queue.pop_front() {
        let px = phi[x].expect("queued states have potentials");
        for t in &chain.rows[x] {
            if phi[t.to].is_none() {
                phi[t.to] = Some(px + t.length as i128);
                queue.push_back(t.to);
            }
        }
    }
    let mut g: u128 = 0;
    for (x, row) in chain.rows.iter().enumerate() {
        for t in row {
            let d = phi[x].unwrap() + t.length as i128 - phi[t.to].unwrap();
            g = g.gcd(&d.unsigned_abs());
        }
    }
    g as u64
}

/// Limiting law of `(X_{τ−1}, X_τ, λ_τ − n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalLimitLaw {
    pub mass: BTreeMap<(StateId, StateId, u64), Rational>,
    pub z: Rational,
}

impl RenewalLimitLaw {
    pub fn get(&self, x: StateId, y: StateId, m: u64) -> Rational {
        self.mass.get(&(x, y, m)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.mass.values().sum()
    }
}

fn limit_law_unchecked(chain: &LengthChain, pi: &[Rational]) -> Result<RenewalLimitLaw> {
    let mut z = Rational::zero();
    for (x, row) in chain.rows.iter().enumerate() {
        for t in row {
            z += &pi[x] * &t.prob * Rational::from_integer(t.length.into());
        }
    }
    if z.is_zero() {
        return Err(Error::AllLengthsZero);
    }
    let mut mass = BTreeMap::new();
    for (x, row) in chain.rows.iter().enumerate() {
        for t in row {
            let w = &pi[x] * &t.prob / &z;
            for m in 0..t.length {
                mass.insert((x, t.to, m), w.clone());
            }
        }
    }
    Ok(RenewalLimitLaw { mass, z })
}

pub fn limit_law(chain: &LengthChain) -> Result<RenewalLimitLaw> {
    match aperiodicity_gcd(chain) {
        0 => return Err(Error::AllLengthsZero),
        1 => {}
        g => return Err(Error::Periodic(g)),
    }
    limit_law_unchecked(chain, &stationary_exact(chain)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Crossing {
    pub prev: StateId,
    pub at: StateId,
    pub overshoot: u64,
}

/// Runs the chain from `x0` until the accumulated length first reaches `n`.
/// Consumes one uniform variate per step.
pub fn simulate_crossing<R: Rng + ?Sized>(chain: &LengthChain, x0: StateId, n: u64, rng: &mut R) -> Result<Crossing> {
    if n == 0 {
        return Err(Error::PreconditionViolated("crossing level must be >= 1".into()));
    }
    if x0 >= chain.k() {
        return Err(Error::VertexOutOfRange { vertex: x0, n: chain.k() });
    }
    if aperiodicity_gcd(chain) == 0 {
        return Err(Error::AllLengthsZero);
    }
    let mut x = x0;
    let mut lambda = 0u64;
    loop {
        let y = chain.step(x, rng);
        lambda += chain.length(x, y).expect("sampled edges exist");
        if lambda >= n {
            return Ok(Crossing { prev: x, at: y, overshoot: lambda - n });
        }
        x = y;
    }
}

/// Limiting probability that the latest crossing of the undirected edge
/// `{x, y}` arrives at `y`. Computed from the closed form and from the
/// limit law with unit lengths on the two orientations; the two must agree.
pub fn crossing_limit(chain: &LengthChain, x: StateId, y: StateId) -> Result<Rational> {
    for s in [x, y] {
        if s >= chain.k() {
            return Err(Error::VertexOutOfRange { vertex: s, n: chain.k() });
        }
    }
    if x == y {
        return Err(Error::PreconditionViolated("crossing edge needs distinct endpoints".into()));
    }
    let pi = stationary_exact(chain)?;
    let fwd = &pi[x] * chain.prob(x, y);
    let back = &pi[y] * chain.prob(y, x);
    if (&fwd + &back).is_zero() {
        return Err(Error::PreconditionViolated(format!("no edge between {x} and {y}")));
    }
    let formula = &fwd / (&fwd + &back);

    let unit = chain.with_lengths(|a, b| u64::from((a, b) == (x, y) || (a, b) == (y, x)));
    let law = limit_law_unchecked(&unit, &pi)?;
    let via_law: Rational = law.mass.iter().filter(|((_, to, _), _)| *to == y).map(|(_, p)| p.clone()).sum();
    if via_law != formula {
        return Err(Error::Inconsistent(format!("crossing law {via_law} disagrees with closed form {formula}")));
    }
    Ok(formula)
}

/// Random irreducible chain on `k` states: a Hamiltonian cycle plus random
/// extra edges, integer weights in `1..=9`, lengths in `0..=max_length`.
/// The self-loop at state 0 has length 1, so the chain is aperiodic.
pub fn random_chain<R: Rng + ?Sized>(k: usize, max_length: u64, rng: &mut R) -> Result<LengthChain> {
    if k == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut weights: BTreeMap<(StateId, StateId), u64> = BTreeMap::new();
    for x in 0..k {
        weights.insert((x, (x + 1) % k), rng.random_range(1..=9));
        for y in 0..k {
            if rng.random_bool(0.3) {
                weights.insert((x, y), rng.random_range(1..=9));
            }
        }
    }
    weights.entry((0, 0)).or_insert(1);
    let mut row_sum = vec![0u64; k];
    for (&(x, _), &w) in &weights {
        row_sum[x] += w;
    }
    let edges = weights
        .into_iter()
        .map(|((x, y), w)| {
            let len = if (x, y) == (0, 0) { 1 } else { rng.random_range(0..=max_length) };
            (x, y, Rational::new(w.into(), row_sum[x].into()), len)
        })
        .collect();
    LengthChain::new(k, edges)
}

/// The chain watched only on `subset`: `P_A = P_AA + P_AB (I − P_BB)⁻¹ P_BA`.
/// States of the result are the elements of `subset` in increasing order;
/// every edge gets length one.
pub fn watched_chain(chain: &LengthChain, subset: &[StateId]) -> Result<(LengthChain, Vec<StateId>)> {
    let k = chain.k();
    let watched: Vec<StateId> = subset.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if watched.is_empty() {
        return Err(Error::PreconditionViolated("watched set is empty".into()));
    }
    if let Some(&s) = watched.iter().find(|&&s| s >= k) {
        return Err(Error::VertexOutOfRange { vertex: s, n: k });
    }
    let mut pos_a = vec![None; k];
    let mut pos_b = vec![None; k];
    let mut rest = Vec::new();
    for (j, &s) in watched.iter().enumerate() {
        pos_a[s] = Some(j);
    }
    for s in 0..k {
        if pos_a[s].is_none() {
            pos_b[s] = Some(rest.len());
            rest.push(s);
        }
    }
    let (na, nb) = (watched.len(), rest.len());

    let mut p_aa = vec![vec![Rational::zero(); na]; na];
    let mut p_ab = vec![vec![Rational::zero(); nb]; na];
    let mut i_minus_bb = vec![vec![Rational::zero(); nb]; nb];
    let mut p_ba = vec![vec![Rational::zero(); na]; nb];
    for (j, row) in i_minus_bb.iter_mut().enumerate() {
        row[j] = Rational::one();
    }
    for (x, row) in chain.rows.iter().enumerate() {
        for t in row {
            match (pos_a[x], pos_a[t.to]) {
                (Some(i), Some(j)) => p_aa[i][j] += &t.prob,
                (Some(i), None) => p_ab[i][pos_b[t.to].unwrap()] += &t.prob,
                (None, Some(j)) => p_ba[pos_b[x].unwrap()][j] += &t.prob,
                (None, None) => i_minus_bb[pos_b[x].unwrap()][pos_b[t.to].unwrap()] -= &t.prob,
            }
        }
    }
    let exits = if nb > 0 { solve_rational(i_minus_bb, p_ba)? } else { Vec::new() };
    let mut edges = Vec::new();
    for i in 0..na {
        for j in 0..na {
            let mut p = p_aa[i][j].clone();
            for (b, exit_row) in exits.iter().enumerate() {
                p += &p_ab[i][b] * &exit_row[j];
            }
            if !p.is_zero() {
                edges.push((i, j, p, 1));
            }
        }
    }
    Ok((LengthChain::new(na, edges)?, watched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicas::replica_rng;

    fn r(p: i64, q: i64) -> Rational {
        Rational::new(p.into(), q.into())
    }

    /// P(a,a) = P(a,b) = 1/2, P(b,a) = 1 with lengths 1, 1, 2.
    fn example() -> LengthChain {
        LengthChain::new(2, vec![(0, 0, r(1, 2), 1), (0, 1, r(1, 2), 1), (1, 0, r(1, 1), 2)]).unwrap()
    }

    fn swap(len: u64) -> LengthChain {
        LengthChain::new(2, vec![(0, 1, r(1, 1), len), (1, 0, r(1, 1), len)]).unwrap()
    }

    fn single() -> LengthChain {
        LengthChain::new(1, vec![(0, 0, r(1, 1), 1)]).unwrap()
    }

    #[test]
    fn stationary_examples() {
        assert_eq!(stationary_exact(&single()).unwrap(), vec![r(1, 1)]);
        assert_eq!(stationary_exact(&example()).unwrap(), vec![r(2, 3), r(1, 3)]);
        assert_eq!(stationary_exact(&swap(1)).unwrap(), vec![r(1, 2), r(1, 2)]);
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(aperiodicity_gcd(&single()), 1);
        assert_eq!(aperiodicity_gcd(&swap(1)), 2);
        assert_eq!(aperiodicity_gcd(&example()), 1);
        assert_eq!(aperiodicity_gcd(&swap(0)), 0);
    }

    #[test]
    fn limit_law_examples() {
        let law = limit_law(&single()).unwrap();
        assert_eq!(law.get(0, 0, 0), r(1, 1));

        let law = limit_law(&example()).unwrap();
        assert_eq!(law.z, r(4, 3));
        for key in [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 0, 1)] {
            assert_eq!(law.mass[&key], r(1, 4));
        }
        assert_eq!(law.total(), r(1, 1));

        let zero_edge = example().with_lengths(|x, y| u64::from((x, y) == (0, 1)));
        let law = limit_law(&zero_edge).unwrap();
        assert!(law.mass.keys().all(|&(x, y, _)| (x, y) == (0, 1)));

        assert_eq!(limit_law(&swap(1)), Err(Error::Periodic(2)));
        assert_eq!(limit_law(&swap(0)), Err(Error::AllLengthsZero));
    }

    #[test]
    fn crossing_examples() {
        let mut rng = replica_rng(1, 0);
        assert_eq!(simulate_crossing(&single(), 0, 7, &mut rng).unwrap(), Crossing { prev: 0, at: 0, overshoot: 0 });
        let cyc = LengthChain::new(2, vec![(0, 1, r(1, 1), 1), (1, 0, r(1, 1), 2)]).unwrap();
        assert_eq!(simulate_crossing(&cyc, 0, 2, &mut rng).unwrap(), Crossing { prev: 1, at: 0, overshoot: 1 });
    }

    #[test]
    fn crossing_limit_examples() {
        assert_eq!(crossing_limit(&swap(1), 0, 1).unwrap(), r(1, 2));
        assert_eq!(crossing_limit(&example(), 0, 1).unwrap(), r(1, 2));
        let cyc3 = LengthChain::new(3, vec![(0, 1, r(1, 1), 1), (1, 2, r(1, 1), 1), (2, 0, r(1, 1), 1)]).unwrap();
        assert_eq!(crossing_limit(&cyc3, 0, 1).unwrap(), r(1, 1));
    }

    #[test]
    fn watched_examples() {
        let (w, states) = watched_chain(&example(), &[0, 1]).unwrap();
        assert_eq!(states, vec![0, 1]);
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(w.prob(x, y), example().prob(x, y));
            }
        }
        let cyc3 = LengthChain::new(3, vec![(0, 1, r(1, 1), 1), (1, 2, r(1, 1), 1), (2, 0, r(1, 1), 1)]).unwrap();
        let (w, _) = watched_chain(&cyc3, &[0, 2]).unwrap();
        assert_eq!(stationary_exact(&w).unwrap(), vec![r(1, 2), r(1, 2)]);
        let (w, _) = watched_chain(&example(), &[0]).unwrap();
        assert_eq!(stationary_exact(&w).unwrap(), vec![r(1, 1)]);
    }

    #[test]
    fn rejects_invalid_chains() {
        assert!(matches!(
            LengthChain::new(2, vec![(0, 1, r(1, 2), 1), (1, 0, r(1, 1), 1)]),
            Err(Error::InvalidDistribution(_))
        ));
        assert_eq!(LengthChain::new(2, vec![(0, 0, r(1, 1), 1), (1, 0, r(1, 1), 1)]), Err(Error::NotIrreducible));
    }

    #[test]
    fn power_iteration_matches_birth_death_closed_form() {
        // Reflecting walk on 0..201, up 1/3, down 2/3: π(x) ∝ 2^{-x}.
        let k = 201;
        let mut edges = vec![(0, 0, r(2, 3), 1), (k - 1, k - 1, r(1, 3), 1)];
        for x in 0..k - 1 {
            edges.push((x, x + 1, r(1, 3), 1));
            edges.push((x + 1, x, r(2, 3), 1));
        }
        let big = LengthChain::new(k, edges).unwrap();
        let pi = stationary(&big).unwrap();
        let norm: f64 = (0..k).map(|x| 0.5f64.powi(x as i32)).sum();
        for (x, p) in pi.iter().enumerate() {
            assert!((p - 0.5f64.powi(x as i32) / norm).abs() < 1e-10, "state {x}");
        }
    }
}
