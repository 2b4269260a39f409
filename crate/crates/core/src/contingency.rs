//! Pairwise count tables over integer codes.

use std::collections::HashMap;

use crate::numeric::compensated_sum;

/// Largest dense table used for pair counting; sparser layouts fall back to
/// hashing.
const DENSE_LIMIT: usize = 1 << 22;

/// Occupied cells of a two-way contingency table, sorted by `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PairTable {
    pub a_bins: usize,
    pub b_bins: usize,
    pub cells: Vec<(u32, u32, u64)>,
    pub total: u64,
}

impl PairTable {
    pub fn count(a: &[u32], b: &[u32], a_bins: usize, b_bins: usize) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let cells = if a_bins.saturating_mul(b_bins) <= DENSE_LIMIT {
            let mut dense = vec![0u64; a_bins * b_bins];
            for (&x, &y) in a.iter().zip(b) {
                dense[x as usize * b_bins + y as usize] += 1;
            }
            dense
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| ((i / b_bins) as u32, (i % b_bins) as u32, c))
                .collect()
        } else {
            let mut map: HashMap<(u32, u32), u64> = HashMap::new();
            for (&x, &y) in a.iter().zip(b) {
                *map.entry((x, y)).or_default() += 1;
            }
            let mut cells: Vec<_> = map.into_iter().map(|((x, y), c)| (x, y, c)).collect();
            cells.sort_unstable();
            cells
        };
        PairTable {
            a_bins,
            b_bins,
            cells,
            total: a.len() as u64,
        }
    }

    pub fn transposed(&self) -> Self {
        let mut cells: Vec<_> = self.cells.iter().map(|&(x, y, c)| (y, x, c)).collect();
        cells.sort_unstable();
        PairTable {
            a_bins: self.b_bins,
            b_bins: self.a_bins,
            cells,
            total: self.total,
        }
    }

    pub fn a_marginal(&self) -> Vec<u64> {
        let mut m = vec![0u64; self.a_bins];
        for &(x, _, c) in &self.cells {
            m[x as usize] += c;
        }
        m
    }

    pub fn b_marginal(&self) -> Vec<u64> {
        let mut m = vec![0u64; self.b_bins];
        for &(_, y, c) in &self.cells {
            m[y as usize] += c;
        }
        m
    }

    /// Plug-in mutual information in bits, clamped at zero.
    pub fn mutual_information(&self) -> f64 {
        let n = self.total;
        let ha = shannon_from_counts(self.a_marginal().into_iter(), n);
        let hb = shannon_from_counts(self.b_marginal().into_iter(), n);
        let hab = shannon_from_counts(self.cells.iter().map(|&(_, _, c)| c), n);
        (ha + hb - hab).max(0.0)
    }
}

/// Shannon entropy in bits of the empirical distribution with the given
/// counts (zeros ignored) and total `n`.
pub(crate) fn shannon_from_counts<I: Iterator<Item = u64>>(counts: I, n: u64) -> f64 {
    let n = n as f64;
    compensated_sum(counts.filter(|&c| c > 0).map(|c| {
        let p = c as f64 / n;
        -p * p.log2()
    }))
}
