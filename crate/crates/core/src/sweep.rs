//! Exhaustive subset sweeps, rankings and bin-sensitivity curves.
//!
//! Every channel is binned once on its full pooled sample; each subset of
//! size `min_size..=max_size` then gets a Chow-Liu joint profile. Subsets are
//! processed on a dedicated thread pool and the results are returned in
//! canonical order (by size, then lexicographically by channel position), so
//! the output is identical for any worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chowliu::{build_tree, fit_from_stats, gather, tree_profile, PairwiseStats, TreeNode};
use crate::entropy::{profile, EntropyProfile};
use crate::error::{Error, Result};
use crate::ingest::SampleTable;
use crate::numeric::compensated_sum;
use crate::quantize::{bin_channel_capped, BinRule, BinnedChannel};

/// Default per-channel bin cap for sweeps.
pub const DEFAULT_MAX_BINS: usize = 2048;

/// Number of subsets with size in `min_size..=max_size` out of `n`.
pub fn subset_count(n: usize, min_size: usize, max_size: usize) -> Result<u128> {
    check_bounds(n, min_size, max_size)?;
    let mut total = 0u128;
    let mut binom = 1u128;
    for k in 0..=max_size {
        if k >= min_size {
            total += binom;
        }
        binom = binom * (n - k) as u128 / (k + 1) as u128;
    }
    Ok(total)
}

fn check_bounds(n: usize, min_size: usize, max_size: usize) -> Result<()> {
    if min_size < 2 || min_size > max_size || max_size > n {
        return Err(Error::InvalidBounds {
            min: min_size,
            max: max_size,
            n,
        });
    }
    Ok(())
}

/// Canonical stream of index subsets: by size, then lexicographic.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    max_size: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        // Advance to the next k-combination, or the first (k+1)-combination.
        let mut i = k;
        while i > 0 && next[i - 1] == self.n - k + i - 1 {
            i -= 1;
        }
        self.current = if i > 0 {
            next[i - 1] += 1;
            for j in i..k {
                next[j] = next[j - 1] + 1;
            }
            Some(next)
        } else if k < self.max_size {
            Some((0..k + 1).collect())
        } else {
            None
        };
        Some(out)
    }
}

/// Enumerates subsets of `0..n` with size in `min_size..=max_size`.
pub fn enumerate_subsets(n: usize, min_size: usize, max_size: usize) -> Result<Subsets> {
    check_bounds(n, min_size, max_size)?;
    Ok(Subsets {
        n,
        max_size,
        current: Some((0..min_size).collect()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointMethod {
    Direct,
    Chowliu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub subset: Vec<String>,
    pub size: usize,
    pub profile: EntropyProfile,
    /// `h1 − hmin`.
    pub gap: f64,
    pub method: JointMethod,
}

impl SubsetResult {
    pub fn new(subset: Vec<String>, profile: EntropyProfile, method: JointMethod) -> Self {
        SubsetResult {
            size: subset.len(),
            gap: profile.gap(),
            subset,
            profile,
            method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub subset: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rule: BinRule,
    pub min_size: usize,
    /// Defaults to the channel count.
    pub max_size: Option<usize>,
    pub workers: usize,
    pub max_bins: Option<usize>,
    pub progress: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rule: BinRule::FreedmanDiaconis,
            min_size: 2,
            max_size: None,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            max_bins: Some(DEFAULT_MAX_BINS),
            progress: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub channels: Vec<String>,
    /// Bin count per channel, `None` when the channel could not be binned.
    pub bin_counts: Vec<Option<usize>>,
    pub results: Vec<SubsetResult>,
    pub failures: Vec<SweepFailure>,
}

/// Bins every channel of the table once; failures are kept per channel.
pub fn bin_table(table: &SampleTable, rule: BinRule, max_bins: Option<usize>) -> Vec<Result<BinnedChannel>> {
    table
        .channels()
        .par_iter()
        .enumerate()
        .map(|(i, name)| bin_channel_capped(table.column_at(i), rule, max_bins).map(|c| c.with_name(name.clone())))
        .collect()
}

struct Progress {
    enabled: bool,
    total: usize,
    done: AtomicUsize,
    start: Instant,
    last_pct: Mutex<usize>,
}

impl Progress {
    fn tick(&self) {
        if !self.enabled {
            return;
        }
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        let pct = done * 100 / self.total.max(1);
        let mut last = self.last_pct.lock().expect("progress lock");
        if pct > *last || done == self.total {
            *last = pct;
            let elapsed = self.start.elapsed().as_secs_f64();
            let eta = elapsed / done as f64 * (self.total - done) as f64;
            eprintln!("[sweep] {done}/{} subsets ({pct}%), elapsed {elapsed:.1}s, eta {eta:.1}s", self.total);
        }
    }
}

/// Chow-Liu profile of every subset in canonical order.
pub fn run_sweep(table: &SampleTable, config: &SweepConfig) -> Result<SweepOutcome> {
    let n = table.channels().len();
    if n < 2 {
        return Err(Error::TooFewChannels { needed: 2, got: n });
    }
    let max_size = config.max_size.unwrap_or(n);
    let subsets: Vec<Vec<usize>> = enumerate_subsets(n, config.min_size, max_size)?.collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidGrid(format!("thread pool: {e}")))?;

    pool.install(|| {
        let binned = bin_table(table, config.rule, config.max_bins);
        let names = table.channels();
        let ok: Vec<Option<&BinnedChannel>> = binned.iter().map(|b| b.as_ref().ok()).collect();

        // With no missing values every subset shares the full row set, so the
        // pairwise tables are counted once for the whole sweep.
        let shared = if ok.iter().all(|c| c.is_some_and(|c| c.codes.iter().all(Option::is_some))) {
            let channels: Vec<&BinnedChannel> = ok.iter().map(|c| c.expect("checked")).collect();
            let rows: Vec<usize> = (0..table.row_count()).collect();
            let bins: Vec<usize> = channels.iter().map(|c| c.bin_count()).collect();
            Some(PairwiseStats::compute(&gather(&channels, &rows), &bins))
        } else {
            None
        };

        let progress = Progress {
            enabled: config.progress,
            total: subsets.len(),
            done: AtomicUsize::new(0),
            start: Instant::now(),
            last_pct: Mutex::new(0),
        };

        let evaluate = |subset: &[usize]| -> Result<EntropyProfile> {
            for &i in subset {
                if let Err(e) = &binned[i] {
                    return Err(Error::InvalidRule(format!("channel {}: {e}", names[i])));
                }
            }
            let channels: Vec<&BinnedChannel> = subset.iter().map(|&i| ok[i].expect("checked")).collect();
            let model = match &shared {
                Some(stats) => {
                    let nodes = channels
                        .iter()
                        .map(|c| TreeNode {
                            name: c.name.clone(),
                            bin_count: c.bin_count(),
                        })
                        .collect();
                    fit_from_stats(stats, subset, nodes, 0)?
                }
                None => build_tree(&channels)?,
            };
            Ok(tree_profile(&model))
        };

        let evaluated: Vec<std::result::Result<SubsetResult, SweepFailure>> = subsets
            .par_iter()
            .map(|subset| {
                let labels: Vec<String> = subset.iter().map(|&i| names[i].clone()).collect();
                let out = match evaluate(subset) {
                    Ok(p) => Ok(SubsetResult::new(labels, p, JointMethod::Chowliu)),
                    Err(e) => Err(SweepFailure {
                        subset: labels,
                        reason: e.to_string(),
                    }),
                };
                progress.tick();
                out
            })
            .collect();

        let mut results = Vec::new();
        let mut failures = Vec::new();
        for r in evaluated {
            match r {
                Ok(r) => results.push(r),
                Err(f) => failures.push(f),
            }
        }
        Ok(SweepOutcome {
            channels: names.to_vec(),
            bin_counts: binned.iter().map(|b| b.as_ref().ok().map(BinnedChannel::bin_count)).collect(),
            results,
            failures,
        })
    })
}

/// Ranks by descending `hmin`, then descending `h1`. Remaining ties keep the
/// input order, which for sweep output is canonical subset order.
pub fn top_k(results: &[SubsetResult], k: usize) -> Vec<SubsetResult> {
    let mut ranked = results.to_vec();
    ranked.sort_by(|a, b| {
        b.profile
            .hmin
            .total_cmp(&a.profile.hmin)
            .then_with(|| b.profile.h1.total_cmp(&a.profile.h1))
    });
    ranked.truncate(k);
    ranked
}

/// Mean profile over all subsets of one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeMean {
    pub size: usize,
    pub count: usize,
    pub mean: EntropyProfile,
}

/// Per-size means over every result of that size, ascending by size.
pub fn size_means(results: &[SubsetResult]) -> Vec<SizeMean> {
    let mut sizes: Vec<usize> = results.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|size| {
            let group: Vec<&SubsetResult> = results.iter().filter(|r| r.size == size).collect();
            let mean = |f: fn(&EntropyProfile) -> f64| compensated_sum(group.iter().map(|r| f(&r.profile))) / group.len() as f64;
            SizeMean {
                size,
                count: group.len(),
                mean: EntropyProfile {
                    h0: mean(|p| p.h0),
                    h1: mean(|p| p.h1),
                    h2: mean(|p| p.h2),
                    hmin: mean(|p| p.hmin),
                },
            }
        })
        .collect()
}

/// Geometric grid `{5, 8, 16, 32, …, 2048}`.
pub fn default_grid() -> Vec<usize> {
    std::iter::once(5).chain((3..=11).map(|e| 1usize << e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleMarker {
    /// Mean bin count the rule picks across the subset's channels.
    pub mean_bins: f64,
    pub bin_counts: Vec<usize>,
    pub profile: EntropyProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub subset: Vec<String>,
    pub points: Vec<(usize, EntropyProfile)>,
    pub fd: Option<RuleMarker>,
    pub scott: Option<RuleMarker>,
}

fn subset_profile(channels: &[BinnedChannel]) -> Result<EntropyProfile> {
    if channels.len() == 1 {
        return Ok(profile(&channels[0].pmf()?));
    }
    Ok(tree_profile(&build_tree(channels)?))
}

fn bin_subset(table: &SampleTable, indices: &[usize], rule: BinRule) -> Result<Vec<BinnedChannel>> {
    indices
        .iter()
        .map(|&i| bin_channel_capped(table.column_at(i), rule, None).map(|c| c.with_name(table.channels()[i].clone())))
        .collect()
}

fn marker(table: &SampleTable, indices: &[usize], rule: BinRule) -> Option<RuleMarker> {
    let channels = bin_subset(table, indices, rule).ok()?;
    let bin_counts: Vec<usize> = channels.iter().map(BinnedChannel::bin_count).collect();
    Some(RuleMarker {
        mean_bins: bin_counts.iter().sum::<usize>() as f64 / bin_counts.len() as f64,
        profile: subset_profile(&channels).ok()?,
        bin_counts,
    })
}

/// Re-bins the subset at each fixed count of `grid` and recomputes its
/// profile. Markers record where the data-driven rules land; a rule that
/// cannot be applied to some channel yields no marker.
pub fn sensitivity(table: &SampleTable, subset: &[String], grid: &[usize]) -> Result<SensitivityCurve> {
    if grid.is_empty() || grid[0] < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("{grid:?}")));
    }
    if subset.is_empty() {
        return Err(Error::TooFewChannels { needed: 1, got: 0 });
    }
    let indices: Vec<usize> = subset.iter().map(|s| table.index_of(s)).collect::<Result<_>>()?;
    let points = grid
        .par_iter()
        .map(|&k| Ok((k, subset_profile(&bin_subset(table, &indices, BinRule::FixedCount(k))?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityCurve {
        subset: subset.to_vec(),
        points,
        fd: marker(table, &indices, BinRule::FreedmanDiaconis),
        scott: marker(table, &indices, BinRule::Scott),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_tree_model, sample};
    use proptest::prelude::*;

    fn binomial(n: u128, k: u128) -> u128 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn subset_count_examples() {
        assert_eq!(subset_count(3, 2, 3).unwrap(), 4);
        assert_eq!(subset_count(6, 2, 6).unwrap(), 57);
        assert_eq!(subset_count(13, 2, 13).unwrap(), 8178);
        assert_eq!(enumerate_subsets(13, 2, 13).unwrap().count(), 8178);
        assert!(matches!(enumerate_subsets(3, 1, 3), Err(Error::InvalidBounds { .. })));
        assert!(enumerate_subsets(3, 3, 2).is_err());
        assert!(enumerate_subsets(3, 2, 4).is_err());
    }

    #[test]
    fn canonical_order() {
        let all: Vec<Vec<usize>> = enumerate_subsets(4, 2, 4).unwrap().collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3],
                vec![0, 1, 2],
                vec![0, 1, 3],
                vec![0, 2, 3],
                vec![1, 2, 3],
                vec![0, 1, 2, 3],
            ]
        );
    }

    fn model_table(seed: u64, k: usize, rows: usize) -> SampleTable {
        let m = random_tree_model(seed, k, 6);
        let codes = sample(&m, rows, seed);
        let cols = codes.columns.iter().map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        SampleTable::new("codes", codes.names.clone(), cols).unwrap()
    }

    #[test]
    fn pairs_only_sweep() {
        let t = model_table(3, 4, 2000);
        let cfg = SweepConfig {
            rule: BinRule::FixedCount(6),
            min_size: 2,
            max_size: Some(2),
            workers: 2,
            ..SweepConfig::default()
        };
        let out = run_sweep(&t, &cfg).unwrap();
        assert_eq!(out.results.len(), 6);
        assert!(out.failures.is_empty());
        assert_eq!(out.results[0].subset, vec!["s0", "s1"]);
        for r in &out.results {
            assert!(r.gap >= -1e-9);
            assert_eq!(r.size, 2);
            assert_eq!(r.method, JointMethod::Chowliu);
        }
    }

    #[test]
    fn shared_and_per_subset_paths_agree() {
        let t = model_table(9, 5, 3000);
        let cfg = SweepConfig {
            rule: BinRule::FixedCount(6),
            workers: 3,
            ..SweepConfig::default()
        };
        let out = run_sweep(&t, &cfg).unwrap();
        let binned: Vec<BinnedChannel> = bin_table(&t, cfg.rule, cfg.max_bins).into_iter().map(|b| b.unwrap()).collect();
        for (subset, r) in enumerate_subsets(5, 2, 5).unwrap().zip(&out.results) {
            let chans: Vec<&BinnedChannel> = subset.iter().map(|&i| &binned[i]).collect();
            let p = tree_profile(&build_tree(&chans).unwrap());
            assert_eq!(p, r.profile);
        }
    }

    #[test]
    fn missing_values_use_pairwise_rows_and_ledger_failures() {
        let mut cols = vec![
            (0..400).map(|i| (i % 7) as f64).collect::<Vec<f64>>(),
            (0..400).map(|i| ((i * 3) % 5) as f64).collect(),
            vec![2.5; 400],
        ];
        cols[1][10] = f64::NAN;
        let t = SampleTable::new("m", vec!["a".into(), "b".into(), "c".into()], cols).unwrap();
        let out = run_sweep(&t, &SweepConfig { workers: 1, ..SweepConfig::default() }).unwrap();
        // Constant "c" cannot be FD-binned: every subset with it fails.
        assert_eq!(out.results.len(), 1);
        assert_eq!(out.results[0].subset, vec!["a", "b"]);
        assert_eq!(out.failures.len(), 3);
        assert!(out.failures[0].reason.contains("degenerate spread"));
    }

    #[test]
    fn top_k_ordering() {
        let mk = |name: &str, h1: f64, hmin: f64| {
            SubsetResult::new(vec![name.into(), "z".into()], EntropyProfile { h0: 9.0, h1, h2: hmin, hmin }, JointMethod::Chowliu)
        };
        let rs = vec![mk("a", 3.0, 1.0), mk("b", 4.0, 2.0), mk("c", 5.0, 2.0), mk("d", 5.0, 2.0)];
        let top = top_k(&rs, 3);
        let names: Vec<&str> = top.iter().map(|r| r.subset[0].as_str()).collect();
        assert_eq!(names, vec!["c", "d", "b"]);
        assert_eq!(top_k(&rs, 10).len(), 4);
    }

    #[test]
    fn size_means_average_each_size() {
        let p = |h: f64| EntropyProfile { h0: h, h1: h, h2: h, hmin: h };
        let rs = vec![
            SubsetResult::new(vec!["a".into(), "b".into()], p(1.0), JointMethod::Chowliu),
            SubsetResult::new(vec!["a".into(), "c".into()], p(3.0), JointMethod::Chowliu),
            SubsetResult::new(vec!["a".into(), "b".into(), "c".into()], p(5.0), JointMethod::Chowliu),
        ];
        let m = size_means(&rs);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].size, m[0].count, m[0].mean.h1), (2, 2, 2.0));
        assert_eq!((m[1].size, m[1].count, m[1].mean.h1), (3, 1, 5.0));
    }

    #[test]
    fn sensitivity_uniform_channel() {
        let v: Vec<f64> = (0..800).map(|i| (i % 8) as f64).collect();
        let t = SampleTable::new("u", vec!["u".into()], vec![v]).unwrap();
        let curve = sensitivity(&t, &["u".to_string()], &[2, 4, 8]).unwrap();
        let h1: Vec<f64> = curve.points.iter().map(|p| p.1.h1).collect();
        assert_eq!(h1, vec![1.0, 2.0, 3.0]);
        let one = sensitivity(&t, &["u".to_string()], &[4]).unwrap();
        assert_eq!(one.points.len(), 1);
        assert!(sensitivity(&t, &["u".to_string()], &[4, 4]).is_err());
        assert!(sensitivity(&t, &["u".to_string()], &[1, 4]).is_err());
        assert_eq!(default_grid(), vec![5, 8, 16, 32, 64, 128, 256, 512, 1024, 2048]);
    }

    proptest! {
        #[test]
        fn counts_match_binomial_sums(n in 2usize..16, a in 2usize..16, b in 2usize..16) {
            let (lo, hi) = (a.min(b).min(n), a.max(b).min(n));
            prop_assume!(lo >= 2);
            let expected: u128 = (lo..=hi).map(|k| binomial(n as u128, k as u128)).sum();
            prop_assert_eq!(subset_count(n, lo, hi).unwrap(), expected);
            prop_assert_eq!(enumerate_subsets(n, lo, hi).unwrap().count() as u128, expected);
        }

        #[test]
        fn adding_a_channel_never_lowers_h0(seed in 0u64..500) {
            let t = model_table(seed, 4, 500);
            let cfg = SweepConfig { rule: BinRule::FixedCount(6), workers: 1, ..SweepConfig::default() };
            let out = run_sweep(&t, &cfg).unwrap();
            prop_assert_eq!(out.results.len(), 11);
            for small in &out.results {
                for big in &out.results {
                    if big.size == small.size + 1 && small.subset.iter().all(|s| big.subset.contains(s)) {
                        prop_assert!(big.profile.h0 >= small.profile.h0 - 1e-9);
                    }
                }
            }
        }
    }
}
