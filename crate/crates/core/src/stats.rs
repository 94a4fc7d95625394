//! Histograms and the comparison statistics used by the Monte Carlo checks.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::Rational;

/// Counts keyed by outcome. Merging is associative, so replica results can
/// be aggregated in any grouping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram<K: Ord> {
    counts: BTreeMap<K, u64>,
    total: u64,
}

impl<K: Ord> Default for Histogram<K> {
    fn default() -> Self {
        Histogram { counts: BTreeMap::new(), total: 0 }
    }
}

impl<K: Ord + Clone> Histogram<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: K) {
        *self.counts.entry(key).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram<K>) {
        for (k, &c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &u64)> {
        self.counts.iter()
    }

    pub fn frequencies(&self) -> BTreeMap<K, f64> {
        let total = self.total.max(1) as f64;
        self.counts.iter().map(|(k, &c)| (k.clone(), c as f64 / total)).collect()
    }

    /// Pushes every key through `f`, summing counts that collide.
    pub fn map_keys<J: Ord + Clone>(&self, mut f: impl FnMut(&K) -> J) -> Histogram<J> {
        let mut out = Histogram::new();
        for (k, &c) in &self.counts {
            *out.counts.entry(f(k)).or_insert(0) += c;
        }
        out.total = self.total;
        out
    }
}

impl<K: Ord + Clone> FromIterator<K> for Histogram<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut h = Histogram::new();
        for k in iter {
            h.add(k);
        }
        h
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn law_to_f64<K: Ord + Clone>(law: &BTreeMap<K, Rational>) -> BTreeMap<K, f64> {
    law.iter().map(|(k, p)| (k.clone(), rational_to_f64(p))).collect()
}

/// Total variation distance `½ Σ |p̂(k) − p(k)|` over the union of supports.
pub fn tv_distance<K: Ord + Clone>(hist: &Histogram<K>, law: &BTreeMap<K, f64>) -> f64 {
    let emp = hist.frequencies();
    let mut sum = 0.0;
    for (k, &p) in law {
        sum += (emp.get(k).copied().unwrap_or(0.0) - p).abs();
    }
    for (k, &q) in &emp {
        if !law.contains_key(k) {
            sum += q;
        }
    }
    0.5 * sum
}

/// Plug-in mutual information (nats) of the two coordinates of a joint
/// histogram.
pub fn mutual_information<A: Ord + Clone, B: Ord + Clone>(joint: &Histogram<(A, B)>) -> f64 {
    let n = joint.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let left = joint.map_keys(|(a, _)| a.clone());
    let right = joint.map_keys(|(_, b)| b.clone());
    joint
        .iter()
        .map(|((a, b), &c)| {
            let pab = c as f64 / n;
            let pa = left.count(a) as f64 / n;
            let pb = right.count(b) as f64 / n;
            pab * (pab / (pa * pb)).ln()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    /// Accepts the null hypothesis at the given level (e.g. 0.01).
    pub fn accepts(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Pearson goodness of fit of `counts` against cell probabilities `probs`.
/// Cells with zero expected count are dropped from the statistic.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> ChiSquare {
    let total: u64 = counts.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = total as f64 * p;
        if expected > 0.0 {
            statistic += (c as f64 - expected).powi(2) / expected;
            cells += 1;
        }
    }
    let dof = cells.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    ChiSquare { statistic, dof, p_value }
}

/// Pearson goodness of fit against the uniform law on `counts.len()` cells.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquare {
    chi_square(counts, &vec![1.0 / counts.len() as f64; counts.len()])
}

/// Sample mean with a normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub samples: usize,
}

impl MeanEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 { values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let std_error = (var / n.max(1) as f64).sqrt();
        MeanEstimate { mean, std_error, ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error), samples: n }
    }

    /// `|mean − target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target).abs() / self.std_error
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_of_exact_match_is_zero() {
        let h: Histogram<u8> = [0, 0, 1, 1].into_iter().collect();
        let law = BTreeMap::from([(0, 0.5), (1, 0.5)]);
        assert_eq!(tv_distance(&h, &law), 0.0);
        let law = BTreeMap::from([(0, 1.0)]);
        assert!((tv_distance(&h, &law) - 0.5).abs() < 1e-15);
        let law = BTreeMap::from([(2, 1.0)]);
        assert!((tv_distance(&h, &law) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_of_product_and_copy() {
        let indep: Histogram<(u8, u8)> = [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().collect();
        assert!(mutual_information(&indep).abs() < 1e-15);
        let copy: Histogram<(u8, u8)> = [(0, 0), (1, 1)].into_iter().collect();
        assert!((mutual_information(&copy) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_flat_counts() {
        let c = chi_square_uniform(&[100, 100, 100]);
        assert_eq!(c.statistic, 0.0);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        assert!(!chi_square_uniform(&[300, 0, 0]).accepts(0.01));
    }

    #[test]
    fn merge_is_additive() {
        let mut a: Histogram<u8> = [1, 2].into_iter().collect();
        let b: Histogram<u8> = [2, 3].into_iter().collect();
        a.merge(&b);
        assert_eq!((a.total(), a.count(&2)), (4, 2));
    }

    #[test]
    fn mean_estimate_constant() {
        let m = MeanEstimate::from_samples(&[0.5; 10]);
        assert_eq!((m.mean, m.std_error), (0.5, 0.0));
        assert_eq!(m.z_score(0.5), 0.0);
    }
}
