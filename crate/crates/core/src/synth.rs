//! Ground-truth generators for oracle testing.
//!
//! [`TrueModel`] is an explicit tree-factored distribution whose entropy
//! profile can be computed by brute-force expansion ([`brute_profile`]) and
//! compared against the message-passing routines in [`crate::chowliu`].
//! [`sample`] draws code tables from a model, and [`sensor_like_table`]
//! produces a continuous accelerometer/gyroscope-shaped table for sweep and
//! sensitivity checks.
//!
//! Every generator is a pure function of its seed. Sampling is sharded by row
//! ranges; shard `s` uses a ChaCha8 stream `s` under the caller's seed, so the
//! output does not depend on the number of worker threads.

use std::collections::VecDeque;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chowliu::{ChowLiuModel, ConditionalTable, TreeNode};
use crate::entropy::{profile_of, EntropyProfile};
use crate::error::{Error, Result};
use crate::ingest::SampleTable;
use crate::quantize::{BinnedChannel, Pmf};

/// Largest joint that [`brute_profile`] will expand.
pub const MAX_EXPANSION: u128 = 1_000_000;

const SHARD_ROWS: usize = 1 << 16;

/// Rooted tree distribution with explicit dense tables.
///
/// `conditionals[i][x_parent][x_i]` is `p(x_i | x_parent)`; it is `None`
/// exactly for the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub names: Vec<String>,
    pub arities: Vec<usize>,
    pub root: usize,
    pub parents: Vec<Option<usize>>,
    pub root_marginal: Vec<f64>,
    pub conditionals: Vec<Option<Vec<Vec<f64>>>>,
}

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Strictly positive random distribution; `skew` > 1 concentrates mass.
fn random_dist(rng: &mut ChaCha8Rng, n: usize, skew: f64) -> Vec<f64> {
    normalized(
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                (-(1.0 - u).ln()).powf(skew) + 1e-3
            })
            .collect(),
    )
}

/// Random tree over `k` channels named `s0..`, each with arity drawn from
/// `2..=a`. Topology: a random permutation where each node after the first
/// attaches to a uniformly chosen earlier node; the first node is the root.
pub fn random_tree_model(seed: u64, k: usize, a: usize) -> TrueModel {
    assert!(k >= 1 && a >= 2, "need k >= 1 and a >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arities: Vec<usize> = (0..k).map(|_| rng.gen_range(2..=a)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);
    let root = order[0];
    let mut parents = vec![None; k];
    for j in 1..k {
        parents[order[j]] = Some(order[rng.gen_range(0..j)]);
    }
    let skew = rng.gen_range(0.5..3.0);
    let root_marginal = random_dist(&mut rng, arities[root], skew);
    let mut conditionals = vec![None; k];
    for &node in &order[1..] {
        let parent = parents[node].expect("non-root");
        let skew = rng.gen_range(0.5..3.0);
        let rows = (0..arities[parent])
            .map(|_| random_dist(&mut rng, arities[node], skew))
            .collect();
        conditionals[node] = Some(rows);
    }
    TrueModel {
        names: (0..k).map(|i| format!("s{i}")).collect(),
        arities,
        root,
        parents,
        root_marginal,
        conditionals,
    }
}

/// `k` independent uniform channels of equal arity, chained 0 → 1 → … .
pub fn uniform_model(k: usize, arity: usize) -> TrueModel {
    let u = vec![1.0 / arity as f64; arity];
    TrueModel {
        names: (0..k).map(|i| format!("s{i}")).collect(),
        arities: vec![arity; k],
        root: 0,
        parents: (0..k).map(|i| i.checked_sub(1)).collect(),
        root_marginal: u.clone(),
        conditionals: (0..k).map(|i| (i > 0).then(|| vec![u.clone(); arity])).collect(),
    }
}

/// Deterministic chain where every channel sits on `bin` of `arity`.
pub fn point_mass_model(k: usize, arity: usize, bin: usize) -> TrueModel {
    let mut delta = vec![0.0; arity];
    delta[bin] = 1.0;
    TrueModel {
        names: (0..k).map(|i| format!("s{i}")).collect(),
        arities: vec![arity; k],
        root: 0,
        parents: (0..k).map(|i| i.checked_sub(1)).collect(),
        root_marginal: delta.clone(),
        conditionals: (0..k).map(|i| (i > 0).then(|| vec![delta.clone(); arity])).collect(),
    }
}

/// Chain 0 → 1 → … where each child copies its parent with probability
/// `keep` and is otherwise uniform.
pub fn copy_chain_model(k: usize, arity: usize, keep: f64) -> TrueModel {
    let mut model = uniform_model(k, arity);
    let noise = (1.0 - keep) / arity as f64;
    for table in model.conditionals.iter_mut().flatten() {
        for (parent_bin, row) in table.iter_mut().enumerate() {
            for (bin, p) in row.iter_mut().enumerate() {
                *p = noise + if bin == parent_bin { keep } else { 0.0 };
            }
        }
    }
    model
}

impl TrueModel {
    pub fn len(&self) -> usize {
        self.arities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arities.is_empty()
    }

    /// Number of joint states, `Π arities`.
    pub fn expansion_size(&self) -> u128 {
        self.arities
            .iter()
            .try_fold(1u128, |acc, &a| acc.checked_mul(a as u128))
            .unwrap_or(u128::MAX)
    }

    /// Nodes ordered root first, parents before children.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut children = vec![Vec::new(); self.len()];
        for (i, p) in self.parents.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        let mut order = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([self.root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            queue.extend(children[v].iter().copied());
        }
        order
    }

    /// Probability of a full tuple under the model.
    pub fn prob(&self, tuple: &[u32]) -> f64 {
        let mut p = self.root_marginal[tuple[self.root] as usize];
        for (i, table) in self.conditionals.iter().enumerate() {
            if let (Some(table), Some(parent)) = (table, self.parents[i]) {
                p *= table[tuple[parent] as usize][tuple[i] as usize];
            }
        }
        p
    }

    /// The same tables as a [`ChowLiuModel`], keeping only positive entries.
    pub fn to_chowliu(&self) -> Result<ChowLiuModel> {
        let positive = |dist: &[f64]| -> Result<Pmf> {
            Pmf::new(
                dist.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(k, &p)| (k as u32, p))
                    .collect(),
            )
        };
        let nodes = self
            .names
            .iter()
            .zip(&self.arities)
            .map(|(name, &bin_count)| TreeNode {
                name: name.clone(),
                bin_count,
            })
            .collect();
        let conditionals = self
            .conditionals
            .iter()
            .map(|t| {
                t.as_ref()
                    .map(|rows| -> Result<ConditionalTable> {
                        let rows = rows
                            .iter()
                            .enumerate()
                            .map(|(pb, row)| Ok((pb as u32, positive(row)?)))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(ConditionalTable::new(rows))
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        ChowLiuModel::from_parts(nodes, self.root, self.parents.clone(), positive(&self.root_marginal)?, conditionals)
    }
}

/// Entropy profile of the fully expanded joint.
pub fn brute_profile(model: &TrueModel) -> Result<EntropyProfile> {
    let size = model.expansion_size();
    if size > MAX_EXPANSION {
        return Err(Error::ExpansionTooLarge(size));
    }
    let mut tuple = vec![0u32; model.len()];
    let mut probs = Vec::with_capacity(size as usize);
    for mut idx in 0..size as usize {
        for (t, &a) in tuple.iter_mut().zip(&model.arities) {
            *t = (idx % a) as u32;
            idx /= a;
        }
        let p = model.prob(&tuple);
        if p > 0.0 {
            probs.push(p);
        }
    }
    Ok(profile_of(&probs))
}

/// Column-major table of sampled codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeTable {
    pub names: Vec<String>,
    pub arities: Vec<usize>,
    pub columns: Vec<Vec<u32>>,
}

impl CodeTable {
    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn row(&self, index: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[index]).collect()
    }

    /// Pre-binned channels with one bin per code value.
    pub fn to_channels(&self) -> Vec<BinnedChannel> {
        self.names
            .iter()
            .zip(&self.arities)
            .zip(&self.columns)
            .map(|((name, &arity), col)| {
                BinnedChannel::from_codes(name.clone(), arity, col.iter().map(|&c| Some(c)).collect())
                    .expect("sampled codes are within arity")
            })
            .collect()
    }
}

fn sampler(dist: &[f64]) -> WeightedIndex<f64> {
    WeightedIndex::new(dist).expect("normalized table")
}

/// Ancestral sampling of `n` rows, root downward.
pub fn sample(model: &TrueModel, n: usize, seed: u64) -> CodeTable {
    let order = model.topological_order();
    let root_sampler = sampler(&model.root_marginal);
    let tables: Vec<Option<Vec<WeightedIndex<f64>>>> = model
        .conditionals
        .iter()
        .map(|t| t.as_ref().map(|rows| rows.iter().map(|r| sampler(r)).collect()))
        .collect();
    let shards: Vec<Vec<Vec<u32>>> = (0..n.div_ceil(SHARD_ROWS))
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let len = SHARD_ROWS.min(n - s * SHARD_ROWS);
            let mut cols = vec![Vec::with_capacity(len); model.len()];
            let mut tuple = vec![0u32; model.len()];
            for _ in 0..len {
                for &node in &order {
                    tuple[node] = match (model.parents[node], &tables[node]) {
                        (Some(p), Some(rows)) => rows[tuple[p] as usize].sample(&mut rng) as u32,
                        _ => root_sampler.sample(&mut rng) as u32,
                    };
                }
                for (col, &v) in cols.iter_mut().zip(&tuple) {
                    col.push(v);
                }
            }
            cols
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); model.len()];
    for shard in shards {
        for (col, part) in columns.iter_mut().zip(shard) {
            col.extend(part);
        }
    }
    CodeTable {
        names: model.names.clone(),
        arities: model.arities.clone(),
        columns,
    }
}

/// Committed reference outputs of the generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenFile {
    pub schema: String,
    pub cases: Vec<GoldenCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub seed: u64,
    pub k: usize,
    pub arity: usize,
    pub model: TrueModel,
    pub profile: EntropyProfile,
    pub sample_seed: u64,
    /// Leading rows of `sample(model, GOLDEN_SAMPLE_ROWS, sample_seed)`.
    pub samples: Vec<Vec<u32>>,
}

impl GoldenFile {
    /// Structural equality, with floats compared to within `tol` (relative
    /// to magnitude, absolute below 1).
    pub fn matches(&self, other: &GoldenFile, tol: f64) -> std::result::Result<(), String> {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0);
        let all_close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y));
        if self.schema != other.schema || self.cases.len() != other.cases.len() {
            return Err("schema or case count differs".into());
        }
        for (a, b) in self.cases.iter().zip(&other.cases) {
            let (ma, mb) = (&a.model, &b.model);
            let structure = (a.seed, a.k, a.arity, a.sample_seed, &ma.names, &ma.arities, ma.root, &ma.parents)
                == (b.seed, b.k, b.arity, b.sample_seed, &mb.names, &mb.arities, mb.root, &mb.parents);
            if !structure {
                return Err(format!("seed {}: structure differs", a.seed));
            }
            let tables = all_close(&ma.root_marginal, &mb.root_marginal)
                && ma.conditionals.iter().zip(&mb.conditionals).all(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => x.len() == y.len() && x.iter().zip(y).all(|(r, s)| all_close(r, s)),
                    (None, None) => true,
                    _ => false,
                });
            if !tables {
                return Err(format!("seed {}: tables differ", a.seed));
            }
            if !all_close(&a.profile.orders(), &b.profile.orders()) {
                return Err(format!("seed {}: profile differs", a.seed));
            }
            if a.samples != b.samples {
                return Err(format!("seed {}: samples differ", a.seed));
            }
        }
        Ok(())
    }
}

pub const GOLDEN_SCHEMA: &str = "sensor-entropy.synth-golden.v1";
pub const GOLDEN_SAMPLE_ROWS: usize = 16;

/// Regenerates the golden cases: seeds 1..=8 over a spread of sizes.
pub fn golden_file() -> Result<GoldenFile> {
    let cases = (1..=8u64)
        .map(|seed| {
            let k = 1 + (seed as usize % 6);
            let arity = 2 + (seed as usize % 5);
            let model = random_tree_model(seed, k, arity);
            let sample_seed = seed * 1000;
            let codes = sample(&model, GOLDEN_SAMPLE_ROWS, sample_seed);
            Ok(GoldenCase {
                seed,
                k,
                arity,
                profile: brute_profile(&model)?,
                samples: (0..GOLDEN_SAMPLE_ROWS).map(|r| codes.row(r)).collect(),
                model,
                sample_seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GoldenFile {
        schema: GOLDEN_SCHEMA.to_string(),
        cases,
    })
}

struct Activity {
    gravity: [f64; 3],
    acc_amp: f64,
    gyro_amp: f64,
    freq_hz: f64,
}

const ACTIVITIES: [Activity; 6] = [
    // walking, upstairs, downstairs, sitting, standing, lying
    Activity { gravity: [0.96, -0.20, -0.15], acc_amp: 0.35, gyro_amp: 0.90, freq_hz: 1.8 },
    Activity { gravity: [0.93, -0.28, -0.20], acc_amp: 0.30, gyro_amp: 0.80, freq_hz: 1.5 },
    Activity { gravity: [0.97, -0.12, -0.18], acc_amp: 0.50, gyro_amp: 1.10, freq_hz: 2.0 },
    Activity { gravity: [0.75, 0.05, 0.65], acc_amp: 0.01, gyro_amp: 0.03, freq_hz: 0.3 },
    Activity { gravity: [0.99, -0.10, 0.05], acc_amp: 0.01, gyro_amp: 0.02, freq_hz: 0.3 },
    Activity { gravity: [0.10, 0.60, 0.79], acc_amp: 0.01, gyro_amp: 0.02, freq_hz: 0.2 },
];

/// Continuous six-axis inertial table (`Acc.X/Y/Z` in g, `Gyro.X/Y/Z` in
/// rad/s, sampled at 50 Hz) plus `Acc.Mag` and `Gyro.Mag`.
///
/// A latent activity switches after geometric dwell times (mean 2,500 rows);
/// each activity fixes a gravity direction, a periodic body-motion amplitude
/// and a gait frequency, with Gaussian sensor noise on top.
pub fn sensor_like_table(seed: u64, rows: usize) -> SampleTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dwell = Geometric::new(1.0 / 2500.0).expect("valid probability");
    let unit = Normal::new(0.0, 1.0).expect("valid sd");
    let axis_weights = [[1.0, 0.45, 0.30], [0.35, 1.0, 0.55]];
    let mut columns: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(rows)).collect();
    let mut activity = rng.gen_range(0..ACTIVITIES.len());
    let mut remaining = dwell.sample(&mut rng) + 1;
    let mut phase = rng.gen_range(0.0..std::f64::consts::TAU);
    for t in 0..rows {
        if remaining == 0 {
            activity = rng.gen_range(0..ACTIVITIES.len());
            remaining = dwell.sample(&mut rng) + 1;
            phase = rng.gen_range(0.0..std::f64::consts::TAU);
        }
        remaining -= 1;
        let a = &ACTIVITIES[activity];
        let angle = std::f64::consts::TAU * a.freq_hz * t as f64 / 50.0 + phase;
        let (s, c) = angle.sin_cos();
        let s2 = (2.0 * angle).sin();
        for axis in 0..3 {
            let body = a.acc_amp * (axis_weights[0][axis] * s + 0.4 * s2 * axis_weights[1][axis]);
            let noise = (0.01 + 0.25 * a.acc_amp) * unit.sample(&mut rng);
            columns[axis].push(a.gravity[axis] + body + noise);
        }
        for axis in 0..3 {
            let rot = a.gyro_amp * axis_weights[1][axis] * c;
            let noise = (0.005 + 0.3 * a.gyro_amp) * unit.sample(&mut rng);
            columns[3 + axis].push(rot + noise);
        }
    }
    let names = ["Acc.X", "Acc.Y", "Acc.Z", "Gyro.X", "Gyro.Y", "Gyro.Z"]
        .map(String::from)
        .to_vec();
    SampleTable::new("synthetic-inertial", names, columns)
        .and_then(|t| t.add_magnitude("Acc.X", "Acc.Y", "Acc.Z", "Acc.Mag"))
        .and_then(|t| t.add_magnitude("Gyro.X", "Gyro.Y", "Gyro.Z", "Gyro.Mag"))
        .expect("generated table is well formed")
}
