//! External cluster validation: misclassification rate, adjusted Rand index
//! and adjusted mutual information.
//!
//! Labels are arbitrary integers; only the induced partition matters.

use std::collections::BTreeMap;

use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Counts between two partitions of the same items.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Dimension {
                expected: truth.len(),
                got: pred.len(),
                context: "label vectors",
            });
        }
        let index = |labels: &[usize]| -> (Vec<usize>, usize) {
            let mut map = BTreeMap::new();
            for &l in labels {
                let next = map.len();
                map.entry(l).or_insert(next);
            }
            (labels.iter().map(|l| map[l]).collect(), map.len())
        };
        let (pi, nr) = index(pred);
        let (ti, nc) = index(truth);
        let mut counts = vec![vec![0; nc]; nr];
        for (&r, &c) in pi.iter().zip(&ti) {
            counts[r][c] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..nc).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Ok(ContingencyTable {
            counts,
            row_sums,
            col_sums,
            n: pred.len(),
        })
    }
}

/// One minus the accuracy under the best one-to-one matching of predicted
/// to true labels. Non-square tables are padded with zeros.
pub fn misclassification_rate(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    if t.n == 0 {
        return Ok(0.0);
    }
    let size = t.row_sums.len().max(t.col_sums.len());
    let mut weights = Matrix::new(size, size, 0i64);
    for (r, row) in t.counts.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            weights[(r, c)] = v as i64;
        }
    }
    let (matched, _) = kuhn_munkres(&weights);
    Ok(1.0 - matched as f64 / t.n as f64)
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Pair-counting Rand index corrected for chance.
///
/// When the denominator vanishes (both partitions trivial in the same way)
/// the index is 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand_index(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    if t.n < 2 {
        return Err(Error::Invalid(
            "adjusted Rand index needs at least two items".into(),
        ));
    }
    let index: f64 = t.counts.iter().flatten().map(|&v| choose2(v)).sum();
    let a: f64 = t.row_sums.iter().map(|&v| choose2(v)).sum();
    let b: f64 = t.col_sums.iter().map(|&v| choose2(v)).sum();
    let expected = a * b / choose2(t.n);
    let max = 0.5 * (a + b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if same_partition(&t) { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

fn same_partition(t: &ContingencyTable) -> bool {
    t.row_sums.len() == t.col_sums.len()
        && t.counts
            .iter()
            .all(|row| row.iter().filter(|&&v| v > 0).count() == 1)
}

fn entropy(sums: &[usize], n: usize) -> f64 {
    let n = n as f64;
    sums.iter()
        .filter(|&&v| v > 0)
        .map(|&v| {
            let p = v as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn mutual_information(t: &ContingencyTable) -> f64 {
    let n = t.n as f64;
    let mut mi = 0.0;
    for (r, row) in t.counts.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0 {
                let v = v as f64;
                mi += v / n * (n * v / (t.row_sums[r] as f64 * t.col_sums[c] as f64)).ln();
            }
        }
    }
    mi
}

/// Expected mutual information under the hypergeometric model of random
/// partitions with the observed marginals.
pub fn expected_mutual_information(row_sums: &[usize], col_sums: &[usize], n: usize) -> f64 {
    let nf = n as f64;
    let lg = |x: usize| ln_gamma(x as f64 + 1.0);
    let lg_n = lg(n);
    let mut emi = 0.0;
    for &a in row_sums {
        for &b in col_sums {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            for nij in lo..=hi {
                let v = nij as f64;
                let term = v / nf * (nf * v / (a as f64 * b as f64)).ln();
                let log_p = lg(a) + lg(b) + lg(n - a) + lg(n - b)
                    - lg_n
                    - lg(nij)
                    - lg(a - nij)
                    - lg(b - nij)
                    - lg(n + nij - a - b);
                emi += term * log_p.exp();
            }
        }
    }
    emi
}

/// Mutual information adjusted for chance, normalized by the arithmetic
/// mean of the two entropies.
pub fn adjusted_mutual_information(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    if t.n == 0 {
        return Err(Error::Invalid(
            "adjusted mutual information needs at least one item".into(),
        ));
    }
    let mi = mutual_information(&t);
    let emi = expected_mutual_information(&t.row_sums, &t.col_sums, t.n);
    let h = 0.5 * (entropy(&t.row_sums, t.n) + entropy(&t.col_sums, t.n));
    let denom = h - emi;
    if denom.abs() < 1e-15 {
        return Ok(if same_partition(&t) { 1.0 } else { 0.0 });
    }
    Ok((mi - emi) / denom)
}
