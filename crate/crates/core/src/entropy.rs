//! Rényi entropies of empirical distributions.
//!
//! `H_α(X) = log₂(Σ p(x)^α) / (1 − α)` for α ∉ {0, 1, ∞}, with the limits
//! dispatched explicitly: α = 0 is the log of the support size, α = 1 the
//! Shannon entropy and α = ∞ the min-entropy `−log₂ max p`. Joint entropies
//! over a few channels are computed exactly from sparse joint histograms.

use std::borrow::Borrow;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, log2_sum_exp2};
use crate::quantize::{BinnedChannel, Pmf};

/// Default cap on the number of hashed joint states for direct enumeration.
pub const DEFAULT_JOINT_BUDGET: usize = 50_000_000;

/// Orders closer than this to 1 are evaluated as Shannon entropy.
const SHANNON_BAND: f64 = 1e-6;

/// Max, Shannon, collision and min-entropy, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
    pub hmin: f64,
}

impl EntropyProfile {
    pub const ZERO: EntropyProfile = EntropyProfile {
        h0: 0.0,
        h1: 0.0,
        h2: 0.0,
        hmin: 0.0,
    };

    pub fn orders(&self) -> [f64; 4] {
        [self.h0, self.h1, self.h2, self.hmin]
    }

    pub fn from_orders(o: [f64; 4]) -> Self {
        EntropyProfile {
            h0: o[0],
            h1: o[1],
            h2: o[2],
            hmin: o[3],
        }
    }

    /// `hmin ≤ h2 ≤ h1 ≤ h0` within `tol`.
    pub fn is_ordered(&self, tol: f64) -> bool {
        self.hmin <= self.h2 + tol && self.h2 <= self.h1 + tol && self.h1 <= self.h0 + tol
    }

    /// Shannon minus min-entropy.
    pub fn gap(&self) -> f64 {
        self.h1 - self.hmin
    }

    /// Componentwise sum, the profile of independent components.
    pub fn plus(&self, other: &EntropyProfile) -> EntropyProfile {
        EntropyProfile {
            h0: self.h0 + other.h0,
            h1: self.h1 + other.h1,
            h2: self.h2 + other.h2,
            hmin: self.hmin + other.hmin,
        }
    }

    /// Removes ordering violations no larger than `tol` that come from
    /// evaluating the orders by different numerical routes.
    pub(crate) fn settle(mut self, tol: f64) -> Self {
        debug_assert!(self.is_ordered(tol), "entropy ordering violated: {self:?}");
        if self.h1 > self.h0 && self.h1 - self.h0 <= tol {
            self.h1 = self.h0;
        }
        if self.h2 > self.h1 && self.h2 - self.h1 <= tol {
            self.h2 = self.h1;
        }
        if self.hmin > self.h2 && self.hmin - self.h2 <= tol {
            self.hmin = self.h2;
        }
        self
    }
}

pub fn shannon(probs: &[f64]) -> f64 {
    compensated_sum(probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()))
}

pub fn min_entropy(probs: &[f64]) -> f64 {
    let max = probs.iter().copied().fold(0.0, f64::max);
    -max.log2()
}

pub fn max_entropy(probs: &[f64]) -> f64 {
    (probs.iter().filter(|&&p| p > 0.0).count() as f64).log2()
}

/// Rényi entropy of a probability vector. Zero entries are ignored.
pub fn renyi_of(probs: &[f64], alpha: f64) -> Result<f64> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    if alpha == 0.0 {
        return Ok(max_entropy(probs));
    }
    if alpha.is_infinite() {
        return Ok(min_entropy(probs));
    }
    if (alpha - 1.0).abs() < SHANNON_BAND {
        return Ok(shannon(probs));
    }
    // log₂ Σ p^α = α·log₂ pmax + log₂ Σ (p/pmax)^α
    let max = probs.iter().copied().fold(0.0, f64::max);
    let tail = compensated_sum(probs.iter().filter(|&&p| p > 0.0).map(|&p| (p / max).powf(alpha)));
    let log_power_sum = alpha * max.log2() + tail.log2();
    Ok(log_power_sum / (1.0 - alpha))
}

/// Rényi entropy of order `alpha` (0 and `f64::INFINITY` included).
pub fn renyi(pmf: &Pmf, alpha: f64) -> Result<f64> {
    let probs: Vec<f64> = pmf.values().collect();
    renyi_of(&probs, alpha)
}

pub fn profile_of(probs: &[f64]) -> EntropyProfile {
    EntropyProfile {
        h0: max_entropy(probs),
        h1: shannon(probs),
        h2: renyi_of(probs, 2.0).expect("order 2 is valid"),
        hmin: min_entropy(probs),
    }
    .settle(1e-9)
}

pub fn profile(pmf: &Pmf) -> EntropyProfile {
    let probs: Vec<f64> = pmf.values().collect();
    profile_of(&probs)
}

/// log₂ Σ p^α computed in the log domain; used by cross-checks.
pub fn log2_power_sum(probs: &[f64], alpha: f64) -> f64 {
    let terms: Vec<f64> = probs.iter().filter(|&&p| p > 0.0).map(|&p| alpha * p.log2()).collect();
    log2_sum_exp2(&terms)
}

/// Empirical joint pmf over tuples of bin indices, sorted by tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseJointPmf {
    arity: usize,
    entries: Vec<(Vec<u32>, f64)>,
    sample_count: u64,
}

impl SparseJointPmf {
    pub fn from_counts(arity: usize, counts: impl IntoIterator<Item = (Vec<u32>, u64)>) -> Result<Self> {
        let mut counts: Vec<(Vec<u32>, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        if counts.is_empty() {
            return Err(Error::EmptyInput);
        }
        if counts.iter().any(|(k, _)| k.len() != arity) {
            return Err(Error::InvalidPmf(format!("tuple arity differs from {arity}")));
        }
        counts.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let n: u64 = counts.iter().map(|(_, c)| c).sum();
        let entries = counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect();
        Ok(SparseJointPmf {
            arity,
            entries,
            sample_count: n,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn entries(&self) -> &[(Vec<u32>, f64)] {
        &self.entries
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn probs(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, p)| *p).collect()
    }

    pub fn get(&self, tuple: &[u32]) -> f64 {
        self.entries
            .binary_search_by(|(k, _)| k.as_slice().cmp(tuple))
            .map_or(0.0, |i| self.entries[i].1)
    }
}

/// Rows where every channel has a code.
pub fn complete_rows<C: Borrow<BinnedChannel>>(channels: &[C]) -> Vec<usize> {
    let len = channels.first().map_or(0, |c| c.borrow().len());
    (0..len)
        .filter(|&r| channels.iter().all(|c| c.borrow().codes.get(r).copied().flatten().is_some()))
        .collect()
}

/// Exact joint histogram of the channels over `rows` by direct counting of
/// the observed code tuples.
///
/// Fails when the number of states that could be occupied,
/// `min(|rows|, Π bᵢ)`, exceeds `budget`.
pub fn joint_direct<C: Borrow<BinnedChannel> + Sync>(
    channels: &[C],
    rows: &[usize],
    budget: usize,
) -> Result<SparseJointPmf> {
    if channels.is_empty() {
        return Err(Error::TooFewChannels { needed: 1, got: 0 });
    }
    if rows.is_empty() {
        return Err(Error::NoCompleteRows);
    }
    let states = channels
        .iter()
        .fold(1u128, |acc, c| acc.saturating_mul(c.borrow().bin_count() as u128));
    let estimated = states.min(rows.len() as u128);
    if estimated > budget as u128 {
        return Err(Error::BudgetExceeded { estimated, budget });
    }
    let counts = rows
        .par_chunks(1 << 15)
        .map(|chunk| {
            let mut local: HashMap<Vec<u32>, u64> = HashMap::new();
            for &r in chunk {
                let key: Option<Vec<u32>> = channels.iter().map(|c| c.borrow().codes[r]).collect();
                if let Some(key) = key {
                    *local.entry(key).or_default() += 1;
                }
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge(b, a);
            }
            for (k, c) in b {
                *a.entry(k).or_default() += c;
            }
            a
        });
    if counts.is_empty() {
        return Err(Error::NoCompleteRows);
    }
    SparseJointPmf::from_counts(channels.len(), counts)
}

fn merge(mut into: HashMap<Vec<u32>, u64>, from: HashMap<Vec<u32>, u64>) -> HashMap<Vec<u32>, u64> {
    for (k, c) in from {
        *into.entry(k).or_default() += c;
    }
    into
}

/// Profile of a joint pmf treated as a flat distribution over its tuples.
pub fn profile_joint(joint: &SparseJointPmf) -> EntropyProfile {
    profile_of(&joint.probs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SKEWED: [f64; 3] = [0.5, 0.25, 0.25];

    fn binary(name: &str, codes: Vec<u32>) -> BinnedChannel {
        BinnedChannel::from_codes(name, 2, codes.into_iter().map(Some).collect()).unwrap()
    }

    #[test]
    fn uniform_256_all_orders_eight() {
        let probs = vec![1.0 / 256.0; 256];
        for alpha in [0.0, 0.5, 1.0, 2.0, 3.7, f64::INFINITY] {
            assert_eq!(renyi_of(&probs, alpha).unwrap(), 8.0, "alpha {alpha}");
        }
    }

    #[test]
    fn skewed_examples() {
        assert!((renyi_of(&SKEWED, 2.0).unwrap() - 1.415_037_499_278_843_8).abs() < 1e-12);
        assert_eq!(renyi_of(&SKEWED, f64::INFINITY).unwrap(), 1.0);
        let p = profile_of(&SKEWED);
        assert!((p.h0 - 3f64.log2()).abs() < 1e-15);
        assert_eq!(p.h1, 1.5);
        assert!((p.h2 + 0.375f64.log2()).abs() < 1e-15);
        assert_eq!(p.hmin, 1.0);
    }

    #[test]
    fn point_mass_profile_is_zero() {
        let pmf = Pmf::new(vec![(42, 1.0)]).unwrap();
        assert_eq!(profile(&pmf), EntropyProfile::ZERO);
    }

    #[test]
    fn near_one_routes_to_shannon() {
        let s = renyi_of(&SKEWED, 1.0 + 5e-7).unwrap();
        assert_eq!(s, shannon(&SKEWED));
        assert!(matches!(renyi_of(&SKEWED, -0.5), Err(Error::NegativeAlpha(_))));
    }

    #[test]
    fn independent_fair_bits() {
        let a = binary("a", vec![0, 0, 1, 1]);
        let b = binary("b", vec![0, 1, 0, 1]);
        let j = joint_direct(&[&a, &b], &[0, 1, 2, 3], DEFAULT_JOINT_BUDGET).unwrap();
        assert_eq!(j.entries().len(), 4);
        assert!(j.entries().iter().all(|(_, p)| *p == 0.25));
        let p = profile_joint(&j);
        assert_eq!(p.orders(), [2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn duplicated_channel_lies_on_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let codes: Vec<Option<u32>> = (0..5000).map(|_| Some(rng.gen_range(0..6) as u32)).collect();
        let a = BinnedChannel::from_codes("a", 6, codes).unwrap();
        let rows = complete_rows(&[&a]);
        let j = joint_direct(&[&a, &a], &rows, DEFAULT_JOINT_BUDGET).unwrap();
        assert!(j.entries().iter().all(|(k, _)| k[0] == k[1]));
        let single = profile(&a.pmf().unwrap());
        let joint = profile_joint(&j);
        for (x, y) in single.orders().iter().zip(joint.orders()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_of_given_cells() {
        let j = SparseJointPmf::from_counts(2, vec![(vec![0, 0], 2), (vec![0, 1], 1), (vec![1, 0], 1)]).unwrap();
        let p = profile_joint(&j);
        assert!((p.h0 - 3f64.log2()).abs() < 1e-12);
        assert_eq!(p.h1, 1.5);
        assert!((p.h2 - 1.415_037_499_278_843_8).abs() < 1e-12);
        assert_eq!(p.hmin, 1.0);
        assert_eq!(j.get(&[0, 1]), 0.25);
        assert_eq!(j.get(&[1, 1]), 0.0);
    }

    #[test]
    fn budget_and_empty_rows() {
        let a = binary("a", vec![0, 1, 0, 1]);
        let err = joint_direct(&[&a, &a, &a], &[0, 1, 2, 3], 3).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { estimated: 4, budget: 3 }));
        assert!(err.to_string().contains("Chow-Liu"));
        assert!(matches!(joint_direct(&[&a], &[], 10), Err(Error::NoCompleteRows)));
        let gappy = BinnedChannel::from_codes("g", 2, vec![None, Some(1), None]).unwrap();
        assert_eq!(complete_rows(&[&a, &gappy]), vec![1]);
    }

    #[test]
    fn product_of_uniform_channels_brute_force() {
        // Oracle: enumerate the full product of k uniform 2^m channels.
        for (k, m) in [(1usize, 1u32), (2, 2), (3, 3), (2, 5)] {
            let card = 1u32 << m;
            let total = card.pow(k as u32);
            let channels: Vec<BinnedChannel> = (0..k)
                .map(|c| {
                    let codes = (0..total).map(|t| Some((t / card.pow(c as u32)) % card)).collect();
                    BinnedChannel::from_codes(format!("c{c}"), card as usize, codes).unwrap()
                })
                .collect();
            let rows: Vec<usize> = (0..total as usize).collect();
            let p = profile_joint(&joint_direct(&channels, &rows, DEFAULT_JOINT_BUDGET).unwrap());
            for h in p.orders() {
                assert!((h - (k as f64 * m as f64)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn joint_is_worker_count_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let chans: Vec<BinnedChannel> = (0..3)
            .map(|i| {
                let codes = (0..200_000).map(|_| Some(rng.gen_range(0..20))).collect();
                BinnedChannel::from_codes(format!("c{i}"), 20, codes).unwrap()
            })
            .collect();
        let rows = complete_rows(&chans);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| joint_direct(&chans, &rows, DEFAULT_JOINT_BUDGET).unwrap());
        let b = many.install(|| joint_direct(&chans, &rows, DEFAULT_JOINT_BUDGET).unwrap());
        assert_eq!(a, b);
        assert_eq!(profile_joint(&a), profile_joint(&b));
    }

    fn random_pmf() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(1e-6f64..1.0, 1..300).prop_map(|w| {
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn non_increasing_in_alpha(probs in random_pmf()) {
            let grid = [0.0, 0.25, 0.5, 0.9, 1.0, 1.5, 2.0, 5.0, 20.0, f64::INFINITY];
            let hs: Vec<f64> = grid.iter().map(|&a| renyi_of(&probs, a).unwrap()).collect();
            for w in hs.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9, "{:?}", hs);
            }
            prop_assert!(profile_of(&probs).is_ordered(1e-9));
        }

        #[test]
        fn relabeling_preserves_entropy(probs in random_pmf(), seed in 0u64..1000) {
            let counts: Vec<(u32, f64)> = probs.iter().enumerate().map(|(i, &p)| (i as u32, p)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut labels: Vec<u32> = (0..counts.len() as u32).map(|i| i * 3 + 1).collect();
            for i in (1..labels.len()).rev() {
                labels.swap(i, rng.gen_range(0..=i));
            }
            let a = Pmf::new(counts.clone());
            let b = Pmf::new(counts.iter().zip(&labels).map(|(&(_, p), &l)| (l, p)).collect());
            if let (Ok(a), Ok(b)) = (a, b) {
                let (pa, pb) = (profile(&a), profile(&b));
                for (x, y) in pa.orders().iter().zip(pb.orders()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn every_order_bounded_by_h0(probs in random_pmf(), alpha in 0.0f64..50.0) {
            let h0 = renyi_of(&probs, 0.0).unwrap();
            prop_assert!(renyi_of(&probs, alpha).unwrap() <= h0 + 1e-9);
        }

        #[test]
        fn log_domain_power_sum_agrees(probs in random_pmf(), alpha in 0.1f64..8.0) {
            prop_assume!((alpha - 1.0).abs() > 1e-3);
            let via_log = log2_power_sum(&probs, alpha) / (1.0 - alpha);
            prop_assert!((via_log - renyi_of(&probs, alpha).unwrap()).abs() < 1e-9);
        }
    }
}
