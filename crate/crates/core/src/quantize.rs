//! Histogram binning of continuous channels and empirical pmfs.
//!
//! Widths come from the Freedman-Diaconis rule (2·IQR·n^(-1/3)), Scott's rule
//! (3.5·σ·n^(-1/3)) or a fixed bin count. Bins are half-open `[eᵢ, eᵢ₊₁)`
//! spanning `[min, max]`, with the maximum folded into the last bin. Width
//! rules use `ceil(range / h)` equal-width bins over the observed range.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Hard ceiling on the number of bins a width rule may produce.
pub const MAX_BINS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinRule {
    FreedmanDiaconis,
    Scott,
    FixedCount(usize),
}

impl fmt::Display for BinRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinRule::FreedmanDiaconis => f.write_str("fd"),
            BinRule::Scott => f.write_str("scott"),
            BinRule::FixedCount(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for BinRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fd" | "freedman-diaconis" | "freedman_diaconis" => Ok(BinRule::FreedmanDiaconis),
            "scott" => Ok(BinRule::Scott),
            other => match other.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(BinRule::FixedCount(k)),
                _ => Err(Error::InvalidRule(s.to_string())),
            },
        }
    }
}

/// Bin layout of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub rule: BinRule,
    /// Width of every bin.
    pub width: f64,
    pub edges: Vec<f64>,
}

impl BinningSpec {
    pub fn bin_count(&self) -> usize {
        self.edges.len() - 1
    }

    /// Unit-width layout for data that is already integer coded in `0..count`.
    pub fn categorical(count: usize) -> Self {
        BinningSpec {
            rule: BinRule::FixedCount(count),
            width: 1.0,
            edges: (0..=count).map(|e| e as f64).collect(),
        }
    }

    fn uniform(rule: BinRule, lo: f64, hi: f64, count: usize) -> Self {
        let width = (hi - lo) / count as f64;
        let mut edges: Vec<f64> = (0..count).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        BinningSpec { rule, width, edges }
    }

    /// Bin index of `value`; values outside the edges are clamped.
    pub fn code(&self, value: f64) -> u32 {
        let last = self.bin_count() - 1;
        let lo = self.edges[0];
        let guess = ((value - lo) / self.width).floor();
        let mut idx = if guess.is_nan() || guess < 0.0 {
            0
        } else {
            (guess as usize).min(last)
        };
        while idx > 0 && value < self.edges[idx] {
            idx -= 1;
        }
        while idx < last && value >= self.edges[idx + 1] {
            idx += 1;
        }
        idx as u32
    }
}

/// A quantized channel; `None` marks a missing source value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedChannel {
    pub name: String,
    pub spec: BinningSpec,
    pub codes: Vec<Option<u32>>,
}

impl BinnedChannel {
    /// Wraps pre-coded data. Every code must be below `bin_count`.
    pub fn from_codes(name: impl Into<String>, bin_count: usize, codes: Vec<Option<u32>>) -> Result<Self> {
        if bin_count == 0 {
            return Err(Error::InvalidPmf("bin count must be positive".into()));
        }
        if let Some(bad) = codes.iter().flatten().find(|&&c| c as usize >= bin_count) {
            return Err(Error::InvalidPmf(format!("code {bad} outside {bin_count} bins")));
        }
        Ok(BinnedChannel {
            name: name.into(),
            spec: BinningSpec::categorical(bin_count),
            codes,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn bin_count(&self) -> usize {
        self.spec.bin_count()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Empirical pmf over non-missing codes.
    pub fn pmf(&self) -> Result<Pmf> {
        let mut counts = vec![0u64; self.bin_count()];
        for c in self.codes.iter().flatten() {
            counts[*c as usize] += 1;
        }
        Pmf::from_counts(counts.into_iter().enumerate().map(|(k, c)| (k as u32, c)))
    }
}

/// Empirical probability mass function over bin indices. Only bins with
/// positive probability are stored, in ascending bin order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    probs: Vec<(u32, f64)>,
}

impl Pmf {
    /// Validates positivity and normalization (± 10⁻⁹).
    pub fn new(mut probs: Vec<(u32, f64)>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput);
        }
        probs.sort_by_key(|&(k, _)| k);
        if probs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidPmf("duplicate bin".into()));
        }
        if let Some(&(k, p)) = probs.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidPmf(format!("bin {k} has probability {p}")));
        }
        let total = compensated_sum(probs.iter().map(|&(_, p)| p));
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPmf(format!("probabilities sum to {total}")));
        }
        Ok(Pmf { probs })
    }

    /// Normalizes counts; zero counts are dropped.
    pub fn from_counts<I: IntoIterator<Item = (u32, u64)>>(counts: I) -> Result<Self> {
        let mut nonzero: Vec<(u32, u64)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        if nonzero.is_empty() {
            return Err(Error::EmptyInput);
        }
        nonzero.sort_by_key(|&(k, _)| k);
        let n: u64 = nonzero.iter().map(|&(_, c)| c).sum();
        let probs = nonzero.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect();
        Ok(Pmf { probs })
    }

    pub fn probs(&self) -> &[(u32, f64)] {
        &self.probs
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.probs.iter().map(|&(_, p)| p)
    }

    pub fn get(&self, bin: u32) -> f64 {
        self.probs
            .binary_search_by_key(&bin, |&(k, _)| k)
            .map_or(0.0, |i| self.probs[i].1)
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }

    pub fn max_prob(&self) -> f64 {
        self.values().fold(0.0, f64::max)
    }
}

/// Empirical pmf of a code sequence.
pub fn pmf_of(codes: &[u32]) -> Result<Pmf> {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for &c in codes {
        *counts.entry(c).or_default() += 1;
    }
    Pmf::from_counts(counts)
}

/// Quantile with linear interpolation between order statistics of a sorted
/// sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

fn present(values: &[f64]) -> Vec<f64> {
    values.iter().copied().filter(|v| !v.is_nan()).collect()
}

pub fn iqr(values: &[f64]) -> Result<f64> {
    let mut v = present(values);
    if v.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: v.len() });
    }
    v.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25))
}

/// Freedman-Diaconis width `2·IQR·n^(-1/3)`. Missing values are ignored.
pub fn fd_width(values: &[f64]) -> Result<f64> {
    let n = values.iter().filter(|v| !v.is_nan()).count();
    let spread = iqr(values)?;
    if spread <= 0.0 {
        return Err(Error::DegenerateSpread);
    }
    Ok(2.0 * spread / (n as f64).cbrt())
}

/// Scott width `3.5·σ·n^(-1/3)` with the sample standard deviation.
pub fn scott_width(values: &[f64]) -> Result<f64> {
    let v = present(values);
    let n = v.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = compensated_sum(v.iter().copied()) / n as f64;
    let var = compensated_sum(v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::DegenerateSpread);
    }
    Ok(3.5 * sigma / (n as f64).cbrt())
}

/// Bin count a rule would produce on `values`, before any cap.
pub fn rule_bin_count(values: &[f64], rule: BinRule) -> Result<usize> {
    let (lo, hi) = min_max(values)?;
    match rule {
        BinRule::FixedCount(k) => Ok(k),
        BinRule::FreedmanDiaconis => width_to_count(hi - lo, fd_width(values)?),
        BinRule::Scott => width_to_count(hi - lo, scott_width(values)?),
    }
}

fn width_to_count(range: f64, width: f64) -> Result<usize> {
    let k = (range / width).ceil().max(1.0);
    if k > MAX_BINS as f64 {
        return Err(Error::TooManyBins(k as usize));
    }
    Ok(k as usize)
}

fn min_max(values: &[f64]) -> Result<(f64, f64)> {
    let mut it = values.iter().copied().filter(|v| !v.is_nan());
    let first = it.next().ok_or(Error::EmptyInput)?;
    Ok(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// Quantizes a channel with no bin cap.
pub fn bin_channel(values: &[f64], rule: BinRule) -> Result<BinnedChannel> {
    bin_channel_capped(values, rule, None)
}

/// Quantizes a channel. When the rule asks for more than `max_bins` bins the
/// count is clamped and the width widened accordingly.
pub fn bin_channel_capped(values: &[f64], rule: BinRule, max_bins: Option<usize>) -> Result<BinnedChannel> {
    let (lo, hi) = min_max(values)?;
    let mut count = rule_bin_count(values, rule)?;
    if count == 0 {
        return Err(Error::InvalidRule("0".into()));
    }
    if let Some(cap) = max_bins {
        count = count.min(cap.max(1));
    }
    let spec = if hi > lo {
        BinningSpec::uniform(rule, lo, hi, count)
    } else {
        BinningSpec::uniform(rule, lo - 0.5, hi + 0.5, count)
    };
    let codes = values
        .iter()
        .map(|&v| if v.is_nan() { None } else { Some(spec.code(v)) })
        .collect();
    Ok(BinnedChannel {
        name: String::new(),
        spec,
        codes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn codes(ch: &BinnedChannel) -> Vec<u32> {
        ch.codes.iter().map(|c| c.unwrap()).collect()
    }

    #[test]
    fn fd_width_examples() {
        // 1000 evenly spaced points on [0, 8]: quartiles 2 and 6.
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 8.0 / 999.0).collect();
        let spread = iqr(&v).unwrap();
        let h = fd_width(&v).unwrap();
        assert!((h - 2.0 * spread / 1000f64.cbrt()).abs() < 1e-12);
        assert!((spread - 4.0).abs() < 1e-12);
        assert!((h - 0.8).abs() < 1e-12);
        assert!(matches!(fd_width(&[3.0; 10]), Err(Error::DegenerateSpread)));
        assert_eq!(fd_width(&[3.0; 10]).unwrap_err().to_string(), "degenerate spread; use fixed_count");
    }

    #[test]
    fn scott_width_examples() {
        // n = 8 with sample variance 4.
        let v = [0.0, 0.0, 0.0, 0.0, 4.0, 4.0, 4.0, 4.0];
        let scale = (4.0f64 / (32.0 / 7.0)).sqrt();
        let v: Vec<f64> = v.iter().map(|x| x * scale).collect();
        assert!((scott_width(&v).unwrap() - 3.5).abs() < 1e-12);
        assert!(matches!(scott_width(&[1.0; 5]), Err(Error::DegenerateSpread)));
        assert!(matches!(scott_width(&[1.0]), Err(Error::TooFewSamples { .. })));
        // σ = 1, n = 1000.
        let v: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let sigma = (1000.0f64 / 999.0).sqrt();
        let unit: Vec<f64> = v.iter().map(|x| x / sigma).collect();
        assert!((scott_width(&unit).unwrap() - 0.35).abs() < 1e-12);
    }

    #[test]
    fn midpoint_goes_to_upper_bin() {
        let ch = bin_channel(&[0.0, 0.5, 1.0], BinRule::FixedCount(2)).unwrap();
        assert_eq!(codes(&ch), vec![0, 1, 1]);
        assert_eq!(ch.spec.edges, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn single_value_fixed_count() {
        let ch = bin_channel(&[2.5; 7], BinRule::FixedCount(1)).unwrap();
        assert_eq!(codes(&ch), vec![0; 7]);
        assert_eq!(ch.bin_count(), 1);
        let ch = bin_channel(&[2.5; 7], BinRule::FixedCount(4)).unwrap();
        assert!(codes(&ch).iter().all(|&c| c == codes(&ch)[0] && c < 4));
    }

    #[test]
    fn missing_values_stay_missing() {
        let ch = bin_channel(&[0.0, f64::NAN, 1.0], BinRule::FixedCount(4)).unwrap();
        assert_eq!(ch.codes, vec![Some(0), None, Some(3)]);
        assert!(matches!(bin_channel(&[f64::NAN], BinRule::Scott), Err(Error::EmptyInput)));
    }

    #[test]
    fn cap_clamps_bin_count() {
        let mut v: Vec<f64> = (0..100_000).map(f64::from).collect();
        v.push(1e7);
        let free = bin_channel(&v, BinRule::FreedmanDiaconis).unwrap();
        assert!(free.bin_count() > 64);
        let capped = bin_channel_capped(&v, BinRule::FreedmanDiaconis, Some(64)).unwrap();
        assert_eq!(capped.bin_count(), 64);
    }

    #[test]
    fn pmf_examples() {
        let p = pmf_of(&[1, 1, 2, 2]).unwrap();
        assert_eq!(p.probs(), &[(1, 0.5), (2, 0.5)]);
        assert_eq!(pmf_of(&[7]).unwrap().probs(), &[(7, 1.0)]);
        assert_eq!(pmf_of(&[0, 0, 0, 1]).unwrap().probs(), &[(0, 0.75), (1, 0.25)]);
        assert!(matches!(pmf_of(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn pmf_validation() {
        assert!(Pmf::new(vec![(0, 0.5), (1, 0.4)]).is_err());
        assert!(Pmf::new(vec![(0, 0.5), (1, 0.0), (2, 0.5)]).is_err());
        assert!(Pmf::new(vec![(0, 0.5), (0, 0.5)]).is_err());
        let p = Pmf::new(vec![(3, 0.25), (1, 0.75)]).unwrap();
        assert_eq!(p.probs()[0], (1, 0.75));
        assert_eq!(p.get(3), 0.25);
        assert_eq!(p.get(2), 0.0);
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("fd".parse::<BinRule>().unwrap(), BinRule::FreedmanDiaconis);
        assert_eq!("scott".parse::<BinRule>().unwrap(), BinRule::Scott);
        assert_eq!("64".parse::<BinRule>().unwrap(), BinRule::FixedCount(64));
        assert!("0".parse::<BinRule>().is_err());
        assert!("sturges".parse::<BinRule>().is_err());
    }

    proptest! {
        #[test]
        fn codes_in_range_and_pmf_normalized(
            values in proptest::collection::vec(-1e3f64..1e3, 2..400),
            k in 1usize..50,
        ) {
            let ch = bin_channel(&values, BinRule::FixedCount(k)).unwrap();
            prop_assert_eq!(ch.bin_count(), k);
            prop_assert!(ch.spec.edges.windows(2).all(|w| w[0] < w[1]));
            for (v, c) in values.iter().zip(&ch.codes) {
                let c = c.unwrap() as usize;
                prop_assert!(c < k);
                prop_assert!(*v >= ch.spec.edges[c]);
                prop_assert!(*v < ch.spec.edges[c + 1] || c == k - 1);
            }
            let total: f64 = ch.pmf().unwrap().values().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn width_rules_give_equal_width_bins(
            values in proptest::collection::vec(-50.0f64..50.0, 20..300),
        ) {
            if let Ok(ch) = bin_channel(&values, BinRule::FreedmanDiaconis) {
                let w = ch.spec.width;
                for pair in ch.spec.edges.windows(2) {
                    prop_assert!(((pair[1] - pair[0]) - w).abs() <= 1e-9 * w.max(1.0) * 1e3);
                }
            }
        }

        #[test]
        fn affine_maps_preserve_codes(
            values in proptest::collection::vec(-1000i32..1000, 8..300),
            scale_pow in -4i32..6,
            shift in -4096i32..4096,
        ) {
            let raw: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let a = 2f64.powi(scale_pow);
            let mapped: Vec<f64> = raw.iter().map(|v| a * v + shift as f64).collect();
            for rule in [BinRule::FreedmanDiaconis, BinRule::Scott, BinRule::FixedCount(13)] {
                match (bin_channel(&raw, rule), bin_channel(&mapped, rule)) {
                    (Ok(x), Ok(y)) => prop_assert_eq!(x.codes, y.codes),
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "rule {rule} failed on one side only"),
                }
            }
        }

        #[test]
        fn widths_scale_linearly(
            values in proptest::collection::vec(-100.0f64..100.0, 16..200),
            scale in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            if let (Ok(a), Ok(b)) = (fd_width(&values), fd_width(&scaled)) {
                prop_assert!((b - a * scale).abs() <= 1e-9 * b.abs());
            }
            let (a, b) = (scott_width(&values).unwrap(), scott_width(&scaled).unwrap());
            prop_assert!((b - a * scale).abs() <= 1e-9 * b.abs());
        }
    }
}
