//! Chow-Liu tree approximation of joint distributions.
//!
//! The tree is the maximum-weight spanning tree of the pairwise mutual
//! information graph. Rooted at `r`, it factors the joint as
//!
//! ```text
//! p_T(x₁, …, xₙ) = p(x_r) · Π_{i ≠ r} p(xᵢ | x_parent(i))
//! ```
//!
//! and every entropy order is evaluated on `p_T` by a single upward pass over
//! the tree, never touching the `Π bᵢ` joint states:
//!
//! - H₁ by the chain rule, `H(X_r) + Σ H(Xᵢ | X_parent(i))`;
//! - H₂ (and any α) by sum-product on `p^α` in the log domain;
//! - H∞ by max-product with argmax backtracking;
//! - H₀ by counting supported tuples in exact integer arithmetic.
//!
//! Tables are plug-in estimates over the rows complete for every channel.
//! Conditional rows exist only for parent bins that were observed; all other
//! parent bins carry no mass under the model and are skipped.

use std::borrow::Borrow;
use std::collections::VecDeque;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contingency::{shannon_from_counts, PairTable};
use crate::entropy::{complete_rows, joint_direct, profile_joint, EntropyProfile, DEFAULT_JOINT_BUDGET};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::quantize::{BinnedChannel, Pmf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub name: String,
    pub bin_count: usize,
}

/// `p(child | parent)` for every parent bin with nonzero mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    rows: Vec<(u32, Vec<(u32, f64)>)>,
}

impl ConditionalTable {
    pub fn new(rows: Vec<(u32, Pmf)>) -> Self {
        let mut rows: Vec<(u32, Vec<(u32, f64)>)> = rows.into_iter().map(|(k, p)| (k, p.probs().to_vec())).collect();
        rows.sort_by_key(|r| r.0);
        ConditionalTable { rows }
    }

    pub fn row(&self, parent_bin: u32) -> Option<&[(u32, f64)]> {
        self.rows
            .binary_search_by_key(&parent_bin, |r| r.0)
            .ok()
            .map(|i| self.rows[i].1.as_slice())
    }

    pub fn rows(&self) -> impl Iterator<Item = (u32, &[(u32, f64)])> {
        self.rows.iter().map(|(k, r)| (*k, r.as_slice()))
    }

    /// Builds rows from a (parent, child) count table.
    fn from_pair_counts(table: &PairTable) -> Self {
        let mut rows = Vec::new();
        let mut cells = table.cells.as_slice();
        while let Some(&(parent, _, _)) = cells.first() {
            let len = cells.iter().take_while(|c| c.0 == parent).count();
            let (group, rest) = cells.split_at(len);
            let total: u64 = group.iter().map(|c| c.2).sum();
            let row = group.iter().map(|&(_, child, c)| (child, c as f64 / total as f64)).collect();
            rows.push((parent, row));
            cells = rest;
        }
        ConditionalTable { rows }
    }
}

/// Tree edge as (parent, child) node indices with its mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChowLiuModel {
    nodes: Vec<TreeNode>,
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Root first; every parent precedes its children.
    order: Vec<usize>,
    root_marginal: Pmf,
    conditionals: Vec<Option<ConditionalTable>>,
    edges: Vec<TreeEdge>,
}

/// Serializable summary of a fitted tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub nodes: Vec<TreeNode>,
    pub root: String,
    pub edges: Vec<DumpEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEdge {
    pub parent: String,
    pub child: String,
    pub weight: f64,
}

impl ChowLiuModel {
    /// Assembles a model from explicit tables. `conditionals[i]` must be
    /// `Some` exactly for the non-root nodes. Edge weights are the mutual
    /// information implied by the tables.
    pub fn from_parts(
        nodes: Vec<TreeNode>,
        root: usize,
        parent: Vec<Option<usize>>,
        root_marginal: Pmf,
        conditionals: Vec<Option<ConditionalTable>>,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 || root >= n || parent.len() != n || conditionals.len() != n {
            return Err(Error::InvalidModel("node, parent and table counts disagree".into()));
        }
        for (i, p) in parent.iter().enumerate() {
            match (i == root, p, &conditionals[i]) {
                (true, None, None) => {}
                (false, Some(p), Some(_)) if *p < n && *p != i => {}
                _ => return Err(Error::InvalidModel(format!("node {i} has an inconsistent parent or table"))),
            }
        }
        let mut model = Self::assemble(nodes, root, parent, root_marginal, conditionals)?;
        model.check_tables()?;
        let marginals = model.marginals();
        model.edges = model
            .order
            .iter()
            .filter_map(|&c| model.parent[c].map(|p| (p, c)))
            .map(|(p, c)| TreeEdge {
                parent: p,
                child: c,
                weight: model.edge_information(p, c, &marginals),
            })
            .collect();
        Ok(model)
    }

    fn assemble(
        nodes: Vec<TreeNode>,
        root: usize,
        parent: Vec<Option<usize>>,
        root_marginal: Pmf,
        conditionals: Vec<Option<ConditionalTable>>,
    ) -> Result<Self> {
        let n = nodes.len();
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        let mut seen = vec![false; n];
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &children[v] {
                if seen[c] {
                    return Err(Error::InvalidModel("parent map contains a cycle".into()));
                }
                seen[c] = true;
                queue.push_back(c);
            }
        }
        if order.len() != n {
            return Err(Error::InvalidModel("parent map is not a single tree".into()));
        }
        Ok(ChowLiuModel {
            nodes,
            root,
            parent,
            children,
            order,
            root_marginal,
            conditionals,
            edges: Vec::new(),
        })
    }

    fn check_tables(&self) -> Result<()> {
        let bins_ok = |node: usize, bin: u32| (bin as usize) < self.nodes[node].bin_count;
        if self.root_marginal.probs().iter().any(|&(k, _)| !bins_ok(self.root, k)) {
            return Err(Error::InvalidModel("root marginal bin out of range".into()));
        }
        for (i, table) in self.conditionals.iter().enumerate() {
            let (Some(table), Some(p)) = (table, self.parent[i]) else {
                continue;
            };
            for (pb, row) in table.rows() {
                if !bins_ok(p, pb) || row.iter().any(|&(k, _)| !bins_ok(i, k)) {
                    return Err(Error::InvalidModel(format!("node {i} table bin out of range")));
                }
                if row.iter().any(|&(_, q)| !(q > 0.0 && q.is_finite())) {
                    return Err(Error::InvalidModel(format!("node {i} has a nonpositive entry")));
                }
                let total = compensated_sum(row.iter().map(|&(_, q)| q));
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "node {i} conditional for parent bin {pb} sums to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn root_marginal(&self) -> &Pmf {
        &self.root_marginal
    }

    pub fn conditional(&self, node: usize) -> Option<&ConditionalTable> {
        self.conditionals[node].as_ref()
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    /// Undirected edge set as sorted `(low, high)` index pairs.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .edges
            .iter()
            .map(|e| (e.parent.min(e.child), e.parent.max(e.child)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn dump(&self) -> ModelDump {
        ModelDump {
            nodes: self.nodes.clone(),
            root: self.nodes[self.root].name.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| DumpEdge {
                    parent: self.nodes[e.parent].name.clone(),
                    child: self.nodes[e.child].name.clone(),
                    weight: e.weight,
                })
                .collect(),
        }
    }

    /// Per-node marginals under the tree model, dense over bins.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.bin_count]).collect();
        for &(k, p) in self.root_marginal.probs() {
            out[self.root][k as usize] = p;
        }
        for &node in &self.order[1..] {
            let parent = self.parent[node].expect("non-root");
            let table = self.conditionals[node].as_ref().expect("non-root table");
            let mut acc = vec![0.0; self.nodes[node].bin_count];
            for (pb, row) in table.rows() {
                let w = out[parent][pb as usize];
                if w == 0.0 {
                    continue;
                }
                for &(k, q) in row {
                    acc[k as usize] += w * q;
                }
            }
            out[node] = acc;
        }
        out
    }

    fn edge_information(&self, parent: usize, child: usize, marginals: &[Vec<f64>]) -> f64 {
        let table = self.conditionals[child].as_ref().expect("child table");
        let mut acc = CompensatedSum::default();
        for (pb, row) in table.rows() {
            let w = marginals[parent][pb as usize];
            if w == 0.0 {
                continue;
            }
            for &(k, q) in row {
                acc.add(w * q * (q / marginals[child][k as usize]).log2());
            }
        }
        acc.value().max(0.0)
    }

    /// Sum of child messages arriving at `node` for bin `bin`.
    fn incoming(&self, node: usize, bin: u32, messages: &[Vec<f64>]) -> f64 {
        self.children[node]
            .iter()
            .map(|&c| messages[c][bin as usize])
            .sum()
    }
}

/// Running log₂-sum-exp₂ accumulator.
#[derive(Default)]
struct LogSum {
    max: f64,
    terms: Vec<f64>,
}

impl LogSum {
    fn clear(&mut self) {
        self.max = f64::NEG_INFINITY;
        self.terms.clear();
    }

    fn push(&mut self, v: f64) {
        if v > self.max {
            self.max = v;
        }
        self.terms.push(v);
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let tail = compensated_sum(self.terms.iter().map(|&v| (v - self.max).exp2()));
        self.max + tail.log2()
    }
}

/// Chain-rule Shannon entropy of the tree model:
/// `H(X_r) + Σᵢ Σ_{x_p} p(x_p) · H(Xᵢ | X_p = x_p)`.
pub fn tree_shannon(model: &ChowLiuModel) -> f64 {
    let marginals = model.marginals();
    let mut acc = CompensatedSum::default();
    for p in model.root_marginal.values() {
        acc.add(-p * p.log2());
    }
    for &node in &model.order[1..] {
        let parent = model.parent[node].expect("non-root");
        let table = model.conditionals[node].as_ref().expect("non-root table");
        for (pb, row) in table.rows() {
            let w = marginals[parent][pb as usize];
            if w == 0.0 {
                continue;
            }
            let h = compensated_sum(row.iter().map(|&(_, q)| -q * q.log2()));
            acc.add(w * h);
        }
    }
    acc.value()
}

/// `log₂ Σ_x p_T(x)^α` by an upward sum-product pass in the log domain.
/// `H_α = tree_power_sum(α) / (1 − α)`.
pub fn tree_power_sum(model: &ChowLiuModel, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::NegativeAlpha(alpha));
    }
    let mut messages: Vec<Vec<f64>> = vec![Vec::new(); model.nodes.len()];
    let mut lse = LogSum::default();
    for &node in model.order.iter().rev() {
        let Some(parent) = model.parent[node] else {
            continue;
        };
        let table = model.conditionals[node].as_ref().expect("non-root table");
        let mut msg = vec![f64::NEG_INFINITY; model.nodes[parent].bin_count];
        for (pb, row) in table.rows() {
            lse.clear();
            for &(k, q) in row {
                lse.push(alpha * q.log2() + model.incoming(node, k, &messages));
            }
            msg[pb as usize] = lse.value();
        }
        messages[node] = msg;
    }
    lse.clear();
    for &(k, p) in model.root_marginal.probs() {
        lse.push(alpha * p.log2() + model.incoming(model.root, k, &messages));
    }
    Ok(lse.value())
}

/// Most probable joint tuple under the tree (max-product with backtracking).
/// Returns `log₂ max p_T` and the argmax codes in node order.
pub fn tree_max_prob(model: &ChowLiuModel) -> (f64, Vec<u32>) {
    let n = model.nodes.len();
    let mut messages: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut best: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &node in model.order.iter().rev() {
        let Some(parent) = model.parent[node] else {
            continue;
        };
        let table = model.conditionals[node].as_ref().expect("non-root table");
        let bins = model.nodes[parent].bin_count;
        let mut msg = vec![f64::NEG_INFINITY; bins];
        let mut arg = vec![0u32; bins];
        for (pb, row) in table.rows() {
            for &(k, q) in row {
                let v = q.log2() + model.incoming(node, k, &messages);
                if v > msg[pb as usize] {
                    msg[pb as usize] = v;
                    arg[pb as usize] = k;
                }
            }
        }
        messages[node] = msg;
        best[node] = arg;
    }
    let mut top = f64::NEG_INFINITY;
    let mut top_bin = 0u32;
    for &(k, p) in model.root_marginal.probs() {
        let v = p.log2() + model.incoming(model.root, k, &messages);
        if v > top {
            top = v;
            top_bin = k;
        }
    }
    let mut assignment = vec![0u32; n];
    assignment[model.root] = top_bin;
    for &node in &model.order[1..] {
        let parent = model.parent[node].expect("non-root");
        assignment[node] = best[node][assignment[parent] as usize];
    }
    (top, assignment)
}

trait Tally: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn checked_add(&self, other: &Self) -> Option<Self>;
    fn checked_mul(&self, other: &Self) -> Option<Self>;
}

impl Tally for u128 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn checked_add(&self, other: &Self) -> Option<Self> {
        u128::checked_add(*self, *other)
    }
    fn checked_mul(&self, other: &Self) -> Option<Self> {
        u128::checked_mul(*self, *other)
    }
}

impl Tally for BigUint {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn checked_add(&self, other: &Self) -> Option<Self> {
        Some(self + other)
    }
    fn checked_mul(&self, other: &Self) -> Option<Self> {
        Some(self * other)
    }
}

fn support_pass<T: Tally>(model: &ChowLiuModel) -> Option<T> {
    let n = model.nodes.len();
    let mut messages: Vec<Vec<T>> = vec![Vec::new(); n];
    let below = |node: usize, bin: u32, messages: &[Vec<T>]| -> Option<T> {
        let mut acc = T::one();
        for &c in &model.children[node] {
            acc = acc.checked_mul(&messages[c][bin as usize])?;
        }
        Some(acc)
    };
    for &node in model.order.iter().rev() {
        let Some(parent) = model.parent[node] else {
            continue;
        };
        let table = model.conditionals[node].as_ref().expect("non-root table");
        let mut msg = vec![T::zero(); model.nodes[parent].bin_count];
        for (pb, row) in table.rows() {
            let mut acc = T::zero();
            for &(k, _) in row {
                let sub = below(node, k, &messages)?;
                if !sub.is_zero() {
                    acc = acc.checked_add(&sub)?;
                }
            }
            msg[pb as usize] = acc;
        }
        messages[node] = msg;
    }
    let mut total = T::zero();
    for &(k, _) in model.root_marginal.probs() {
        total = total.checked_add(&below(model.root, k, &messages)?)?;
    }
    Some(total)
}

/// Exact number of tuples with `p_T(x) > 0`.
pub fn tree_support_count(model: &ChowLiuModel) -> BigUint {
    match support_pass::<u128>(model) {
        Some(c) => BigUint::from(c),
        None => support_pass::<BigUint>(model).expect("big integers do not overflow"),
    }
}

/// log₂ of an arbitrarily large integer.
pub fn log2_big(value: &BigUint) -> f64 {
    if Zero::is_zero(value) {
        return f64::NEG_INFINITY;
    }
    let bits = value.bits();
    if bits <= 64 {
        return value.to_u64().expect("fits").to_f64().expect("finite").log2();
    }
    let shift = bits - 64;
    let top = (value >> shift).to_u64().expect("fits");
    (top as f64).log2() + shift as f64
}

/// All four orders of the tree model.
pub fn tree_profile(model: &ChowLiuModel) -> EntropyProfile {
    let h0 = log2_big(&tree_support_count(model));
    let h1 = tree_shannon(model);
    let h2 = -tree_power_sum(model, 2.0).expect("order 2 is valid");
    let hmin = -tree_max_prob(model).0;
    EntropyProfile { h0, h1, h2, hmin }.settle(1e-9 * h0.max(1.0))
}

/// Pairwise count tables and mutual information over a shared row set.
pub(crate) struct PairwiseStats {
    n: usize,
    tables: Vec<PairTable>,
    information: Vec<f64>,
}

impl PairwiseStats {
    fn pair_index(n: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < n);
        i * n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Counts every pair of the given code columns (all of equal length).
    pub(crate) fn compute(codes: &[Vec<u32>], bins: &[usize]) -> Self {
        let n = codes.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let tables: Vec<PairTable> = pairs
            .par_iter()
            .map(|&(i, j)| PairTable::count(&codes[i], &codes[j], bins[i], bins[j]))
            .collect();
        let information = tables.iter().map(PairTable::mutual_information).collect();
        PairwiseStats { n, tables, information }
    }

    pub(crate) fn table(&self, i: usize, j: usize) -> &PairTable {
        &self.tables[Self::pair_index(self.n, i, j)]
    }

    pub(crate) fn information(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (i.min(j), i.max(j));
        self.information[Self::pair_index(self.n, a, b)]
    }
}

/// Maximum-weight spanning tree by Kruskal. Equal weights are ordered by the
/// lexicographically smaller (name, name) pair, then by index.
fn max_spanning_tree(names: &[&str], weight: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize, f64)> {
    let n = names.len();
    let mut candidates: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, weight(i, j)))
        .collect();
    let key = |i: usize, j: usize| {
        let (a, b) = (names[i], names[j]);
        if a <= b { (a, b) } else { (b, a) }
    };
    candidates.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then_with(|| key(x.0, x.1).cmp(&key(y.0, y.1)))
            .then_with(|| (x.0, x.1).cmp(&(y.0, y.1)))
    });
    let mut component: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], mut v: usize) -> usize {
        while c[v] != v {
            c[v] = c[c[v]];
            v = c[v];
        }
        v
    }
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (i, j, w) in candidates {
        let (ri, rj) = (find(&mut component, i), find(&mut component, j));
        if ri != rj {
            component[ri] = rj;
            tree.push((i, j, w));
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    tree
}

/// Fits a Chow-Liu model from pairwise statistics over one row set.
/// `members` selects and orders the channels (indices into `stats`).
pub(crate) fn fit_from_stats(
    stats: &PairwiseStats,
    members: &[usize],
    nodes: Vec<TreeNode>,
    root: usize,
) -> Result<ChowLiuModel> {
    let n = members.len();
    if n < 2 {
        return Err(Error::TooFewChannels { needed: 2, got: n });
    }
    let names: Vec<&str> = nodes.iter().map(|t| t.name.as_str()).collect();
    let tree = max_spanning_tree(&names, |i, j| stats.information(members[i], members[j]));

    // Orientation (parent, child) table for local nodes a -> b.
    let oriented = |a: usize, b: usize| -> PairTable {
        let (ga, gb) = (members[a], members[b]);
        if ga < gb {
            stats.table(ga, gb).clone()
        } else {
            stats.table(gb, ga).transposed()
        }
    };

    let mut adjacency = vec![Vec::new(); n];
    for &(i, j, w) in &tree {
        adjacency[i].push((j, w));
        adjacency[j].push((i, w));
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|e| e.0);
    }
    let mut parent = vec![None; n];
    let mut conditionals: Vec<Option<ConditionalTable>> = vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut visited = vec![false; n];
    visited[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &(c, w) in &adjacency[v] {
            if visited[c] {
                continue;
            }
            visited[c] = true;
            parent[c] = Some(v);
            conditionals[c] = Some(ConditionalTable::from_pair_counts(&oriented(v, c)));
            edges.push(TreeEdge {
                parent: v,
                child: c,
                weight: w,
            });
            queue.push_back(c);
        }
    }
    let other = if root == 0 { 1 } else { 0 };
    let root_counts = oriented(root, other).a_marginal();
    let root_marginal = Pmf::from_counts(root_counts.into_iter().enumerate().map(|(k, c)| (k as u32, c)))?;
    let mut model = ChowLiuModel::assemble(nodes, root, parent, root_marginal, conditionals)?;
    model.edges = edges;
    Ok(model)
}

/// Codes of each channel restricted to `rows`.
pub(crate) fn gather<C: Borrow<BinnedChannel>>(channels: &[C], rows: &[usize]) -> Vec<Vec<u32>> {
    channels
        .iter()
        .map(|c| {
            let codes = &c.borrow().codes;
            rows.iter().map(|&r| codes[r].expect("complete row")).collect()
        })
        .collect()
}

fn tree_nodes<C: Borrow<BinnedChannel>>(channels: &[C]) -> Vec<TreeNode> {
    channels
        .iter()
        .map(|c| TreeNode {
            name: c.borrow().name.clone(),
            bin_count: c.borrow().bin_count(),
        })
        .collect()
}

/// Fits the Chow-Liu tree of the channels over their complete rows, rooted
/// at the first channel.
pub fn build_tree<C: Borrow<BinnedChannel> + Sync>(channels: &[C]) -> Result<ChowLiuModel> {
    build_tree_rooted(channels, 0)
}

/// As [`build_tree`] with an explicit root index.
pub fn build_tree_rooted<C: Borrow<BinnedChannel> + Sync>(channels: &[C], root: usize) -> Result<ChowLiuModel> {
    if channels.len() < 2 {
        return Err(Error::TooFewChannels {
            needed: 2,
            got: channels.len(),
        });
    }
    if root >= channels.len() {
        return Err(Error::InvalidModel(format!("root {root} out of range")));
    }
    let rows = complete_rows(channels);
    if rows.is_empty() {
        return Err(Error::NoCompleteRows);
    }
    let codes = gather(channels, &rows);
    let bins: Vec<usize> = channels.iter().map(|c| c.borrow().bin_count()).collect();
    let stats = PairwiseStats::compute(&codes, &bins);
    let members: Vec<usize> = (0..channels.len()).collect();
    fit_from_stats(&stats, &members, tree_nodes(channels), root)
}

/// Direct enumeration against the tree approximation on identical rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub subset: Vec<String>,
    pub n: usize,
    pub direct: EntropyProfile,
    pub chowliu: EntropyProfile,
    /// Mean over the four orders of |direct − tree|, in bits.
    pub mae: f64,
    /// Mean over the orders with a positive direct value of |Δ| / direct, in
    /// percent.
    pub rel_error_pct: f64,
}

impl ValidationReport {
    pub fn new(subset: Vec<String>, direct: EntropyProfile, chowliu: EntropyProfile) -> Self {
        let pairs: Vec<(f64, f64)> = direct.orders().into_iter().zip(chowliu.orders()).collect();
        let mae = pairs.iter().map(|(d, c)| (d - c).abs()).sum::<f64>() / 4.0;
        let rel: Vec<f64> = pairs
            .iter()
            .filter(|(d, _)| *d > 0.0)
            .map(|(d, c)| (d - c).abs() / d)
            .collect();
        let rel_error_pct = if rel.is_empty() {
            0.0
        } else {
            100.0 * rel.iter().sum::<f64>() / rel.len() as f64
        };
        ValidationReport {
            n: subset.len(),
            subset,
            direct,
            chowliu,
            mae,
            rel_error_pct,
        }
    }
}

/// Validates the tree against exact enumeration for 2 or 3 channels.
pub fn validate<C: Borrow<BinnedChannel> + Sync>(channels: &[C]) -> Result<ValidationReport> {
    validate_with_budget(channels, DEFAULT_JOINT_BUDGET)
}

pub fn validate_with_budget<C: Borrow<BinnedChannel> + Sync>(channels: &[C], budget: usize) -> Result<ValidationReport> {
    match channels.len() {
        0 | 1 => return Err(Error::ValidationTooSmall),
        2 | 3 => {}
        n => return Err(Error::ValidationTooLarge(n)),
    }
    let rows = complete_rows(channels);
    let direct = profile_joint(&joint_direct(channels, &rows, budget)?);
    let tree = tree_profile(&build_tree(channels)?);
    let names = channels.iter().map(|c| c.borrow().name.clone()).collect();
    Ok(ValidationReport::new(names, direct, tree))
}

/// Shannon entropy of one channel over the given rows (test and report
/// helper).
pub fn channel_shannon(codes: &[u32], bins: usize) -> f64 {
    let mut counts = vec![0u64; bins];
    for &c in codes {
        counts[c as usize] += 1;
    }
    shannon_from_counts(counts.into_iter(), codes.len() as u64)
}
