//! Pairwise redundancy between channels: Pearson correlation on raw values
//! and plug-in mutual information on binned codes. Each cell uses the rows
//! where both channels are present.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contingency::PairTable;
use crate::error::{Error, Result};
use crate::ingest::SampleTable;
use crate::numeric::compensated_sum;
use crate::quantize::BinnedChannel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceKind {
    Pearson,
    MutualInformationBits,
}

/// Symmetric channel-by-channel matrix. Cells whose computation failed are
/// `None` and listed in `failures`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceMatrix {
    pub channels: Vec<String>,
    pub kind: DependenceKind,
    pub values: Vec<Vec<Option<f64>>>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

impl DependenceMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.channels.iter().position(|c| c == a)?;
        let j = self.channels.iter().position(|c| c == b)?;
        self.values[i][j]
    }

    /// Comma-separated export with a header row; failed cells are empty.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("channel");
        for c in &self.channels {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (name, row) in self.channels.iter().zip(&self.values) {
            out.push_str(&csv_field(name));
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v:?}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sample Pearson correlation over the pairwise-complete entries.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !x.is_nan() && !y.is_nan())
        .map(|(&x, &y)| (x, y))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: pairs.len(),
        });
    }
    let n = pairs.len() as f64;
    let mx = compensated_sum(pairs.iter().map(|p| p.0)) / n;
    let my = compensated_sum(pairs.iter().map(|p| p.1)) / n;
    let sxy = compensated_sum(pairs.iter().map(|&(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(pairs.iter().map(|&(x, _)| (x - mx) * (x - mx)));
    let syy = compensated_sum(pairs.iter().map(|&(_, y)| (y - my) * (y - my)));
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn overlap(a: &BinnedChannel, b: &BinnedChannel) -> Result<PairTable> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (xs, ys): (Vec<u32>, Vec<u32>) = a
        .codes
        .iter()
        .zip(&b.codes)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    if xs.is_empty() {
        return Err(Error::NoCompleteRows);
    }
    Ok(PairTable::count(&xs, &ys, a.bin_count(), b.bin_count()))
}

/// Plug-in `I(X;Y) = H(X) + H(Y) − H(X,Y)` in bits, on the rows where both
/// channels are present.
pub fn mutual_information(a: &BinnedChannel, b: &BinnedChannel) -> Result<f64> {
    Ok(overlap(a, b)?.mutual_information())
}

/// Full dependence matrix in table channel order. `binned` must hold one
/// channel per table column (same order) for the mutual information kind.
pub fn matrix(table: &SampleTable, binned: &[BinnedChannel], kind: DependenceKind) -> Result<DependenceMatrix> {
    let n = table.channels().len();
    if n < 2 {
        return Err(Error::TooFewChannels { needed: 2, got: n });
    }
    if kind == DependenceKind::MutualInformationBits && binned.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: binned.len(),
        });
    }
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let results: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(i, j)| match kind {
            DependenceKind::Pearson => {
                let r = pearson(table.column_at(i), table.column_at(j));
                if i == j { r.map(|_| 1.0) } else { r }
            }
            DependenceKind::MutualInformationBits => mutual_information(&binned[i], &binned[j]),
        })
        .collect();
    let mut values = vec![vec![None; n]; n];
    let mut failures = Vec::new();
    for (&(i, j), r) in cells.iter().zip(results) {
        match r {
            Ok(v) => {
                values[i][j] = Some(v);
                values[j][i] = Some(v);
            }
            Err(e) => failures.push(CellFailure {
                row: i,
                col: j,
                reason: e.to_string(),
            }),
        }
    }
    Ok(DependenceMatrix {
        channels: table.channels().to_vec(),
        kind,
        values,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::profile;
    use crate::quantize::{bin_channel, BinRule};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coded(name: &str, bins: usize, codes: &[u32]) -> BinnedChannel {
        BinnedChannel::from_codes(name, bins, codes.iter().map(|&c| Some(c)).collect()).unwrap()
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[2.0; 100]), Err(Error::UndefinedCorrelation)));
        assert_eq!(pearson(&x, &[2.0; 100]).unwrap_err().to_string(), "undefined correlation: constant input");
    }

    #[test]
    fn pearson_of_independent_uniforms_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let a: Vec<f64> = (0..200_000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..200_000).map(|_| rng.gen::<f64>()).collect();
        // Independent route: textbook one-pass formula on raw sums.
        let n = a.len() as f64;
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        let sab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|x| x * x).sum();
        let oracle = (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt());
        let rho = pearson(&a, &b).unwrap();
        assert!((rho - oracle).abs() < 1e-9);
        assert!(rho.abs() < 0.01);
    }

    #[test]
    fn mi_of_identical_sequences_is_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let codes: Vec<u32> = (0..10_000).map(|_| rng.gen_range(0..9)).collect();
        let a = coded("a", 9, &codes);
        let h1 = profile(&a.pmf().unwrap()).h1;
        assert!((mutual_information(&a, &a).unwrap() - h1).abs() < 1e-9);
    }

    #[test]
    fn mi_of_independent_analytic_bits_is_zero() {
        let a = coded("a", 2, &[0, 0, 1, 1]);
        let b = coded("b", 2, &[0, 1, 0, 1]);
        assert_eq!(mutual_information(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn mi_uses_pairwise_complete_rows() {
        let a = BinnedChannel::from_codes("a", 2, vec![Some(0), None, Some(1), Some(1)]).unwrap();
        let b = BinnedChannel::from_codes("b", 2, vec![Some(0), Some(1), None, Some(1)]).unwrap();
        // Overlap rows 0 and 3: (0,0), (1,1) → I = 1 bit.
        assert!((mutual_information(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = BinnedChannel::from_codes("c", 2, vec![None, Some(0), None, None]).unwrap();
        assert!(matches!(mutual_information(&a, &c), Err(Error::NoCompleteRows)));
    }

    #[test]
    fn matrix_diagonals_and_failures() {
        let table = SampleTable::from_rows(
            "t",
            vec!["a".into(), "b".into(), "flat".into()],
            &(0..50).map(|i| vec![i as f64, (i * i) as f64, 1.0]).collect::<Vec<_>>(),
        )
        .unwrap();
        let binned: Vec<BinnedChannel> = table
            .channels()
            .iter()
            .map(|c| bin_channel(table.column(c).unwrap(), BinRule::FixedCount(4)).unwrap().with_name(c.clone()))
            .collect();
        let p = matrix(&table, &binned, DependenceKind::Pearson).unwrap();
        assert_eq!(p.values[0][0], Some(1.0));
        assert_eq!(p.values[0][1], p.values[1][0]);
        assert_eq!(p.values[2][2], None);
        assert!(!p.failures.is_empty());
        let mi = matrix(&table, &binned, DependenceKind::MutualInformationBits).unwrap();
        for (i, ch) in binned.iter().enumerate() {
            let h1 = profile(&ch.pmf().unwrap()).h1;
            assert!((mi.values[i][i].unwrap() - h1).abs() < 1e-9);
        }
        assert!(mi.to_delimited().starts_with("channel,a,b,flat\n"));
    }

    #[test]
    fn matrix_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let base: f64 = rng.gen();
                vec![base, base + 0.3 * rng.gen::<f64>(), rng.gen(), base * base]
            })
            .collect();
        let names: Vec<String> = ["w", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let table = SampleTable::from_rows("t", names.clone(), &rows).unwrap();
        let perm = [2usize, 0, 3, 1];
        let permuted_names: Vec<String> = perm.iter().map(|&i| names[i].clone()).collect();
        let permuted = table.select(&permuted_names).unwrap();
        let bin = |t: &SampleTable| -> Vec<BinnedChannel> {
            t.channels()
                .iter()
                .map(|c| bin_channel(t.column(c).unwrap(), BinRule::FreedmanDiaconis).unwrap())
                .collect()
        };
        for kind in [DependenceKind::Pearson, DependenceKind::MutualInformationBits] {
            let m = matrix(&table, &bin(&table), kind).unwrap();
            let pm = matrix(&permuted, &bin(&permuted), kind).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(pm.values[i][j], m.values[perm[i]][perm[j]]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn mi_symmetric_and_bounded(
            pairs in proptest::collection::vec((0u32..6, 0u32..4), 1..500),
        ) {
            let (xs, ys): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
            let a = coded("a", 6, &xs);
            let b = coded("b", 4, &ys);
            let ab = mutual_information(&a, &b).unwrap();
            let ba = mutual_information(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            let ha = profile(&a.pmf().unwrap()).h1;
            let hb = profile(&b.pmf().unwrap()).h1;
            prop_assert!(ab >= 0.0);
            prop_assert!(ab <= ha.min(hb) + 1e-9);
        }

        #[test]
        fn pearson_affine_invariant(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..200),
            a in 0.01f64..50.0,
            b in -100.0f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + (i as f64).sin()).collect();
            let mapped: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            if let (Ok(r1), Ok(r2)) = (pearson(&xs, &ys), pearson(&mapped, &ys)) {
                prop_assert!((r1 - r2).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r1));
            }
        }
    }
}
