//! Nonparametric comparisons between algorithms: Mann-Whitney U,
//! Vargha-Delaney effect size and the Wilcoxon signed-rank test.
//!
//! Small samples without ties get exact p-values from the null
//! distribution; larger ones use the tie-corrected normal approximation
//! with continuity correction.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Default significance level for reporting.
pub const ALPHA: f64 = 0.01;

/// Largest `n + m` for the exact Mann-Whitney branch.
pub const MWU_EXACT_MAX: usize = 16;

/// Largest number of non-zero differences for the exact Wilcoxon branch.
pub const WILCOXON_EXACT_MAX: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample: pairs where `a > b`, ties counting half.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// Sum of the ranks of positive differences.
    pub w: f64,
    pub p_value: f64,
    pub exact: bool,
    /// Non-zero differences used.
    pub n: usize,
}

/// Midranks (1-based) of `values` and the sizes of tie groups larger than one.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

fn two_sided_normal(z: f64) -> f64 {
    erfc(z.max(0.0) / std::f64::consts::SQRT_2).min(1.0)
}

fn tail_p(counts: &[u64], observed: usize, total: u64) -> f64 {
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

/// Number of rank assignments giving each value of U for samples of size n and m.
fn mwu_null_counts(n: usize, m: usize) -> Vec<u64> {
    // table[i][j][u]: ways for i first-sample and j second-sample items
    let max_u = n * m;
    let mut table = vec![vec![vec![0u64; max_u + 1]; m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 || j == 0 {
                table[i][j][0] = 1;
                continue;
            }
            for u in 0..=i * j {
                // largest item from the first sample beats all j others
                let from_first = if u >= j { table[i - 1][j][u - j] } else { 0 };
                table[i][j][u] = from_first + table[i][j - 1][u];
            }
        }
    }
    table.swap_remove(n).swap_remove(m)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Mann-Whitney needs two non-empty samples"));
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum: f64 = ranks[..n].iter().sum();
    let u = rank_sum - (n * (n + 1)) as f64 / 2.0;

    if n + m <= MWU_EXACT_MAX && ties.is_empty() {
        let counts = mwu_null_counts(n, m);
        let total: u64 = counts.iter().sum();
        let p_value = tail_p(&counts, u.round() as usize, total);
        return Ok(MannWhitney { u, p_value, exact: true });
    }

    let big_n = (n + m) as f64;
    let nm = (n * m) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = nm / 12.0 * ((big_n + 1.0) - tie_term);
    let p_value = if var <= 0.0 {
        1.0
    } else {
        two_sided_normal(((u - nm / 2.0).abs() - 0.5) / var.sqrt())
    };
    Ok(MannWhitney { u, p_value, exact: false })
}

/// Probability that a draw from `a` exceeds one from `b`, ties counting half.
pub fn vargha_delaney(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Vargha-Delaney needs two non-empty samples"));
    }
    let mut doubled = 0u64;
    for x in a {
        for y in b {
            doubled += match x.partial_cmp(y) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(doubled as f64 / (2 * a.len() * b.len()) as f64)
}

pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<Wilcoxon> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::UndefinedTest("all paired differences are zero".into()));
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w: f64 = ranks.iter().zip(&nonzero).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();

    if n <= WILCOXON_EXACT_MAX {
        // doubled midranks are integers, so the null distribution is a subset-sum count
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max + 1];
        counts[0] = 1;
        for &r in &doubled {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let observed = (2.0 * w).round() as usize;
        let p_value = tail_p(&counts, observed, 1u64 << n);
        return Ok(Wilcoxon { w, p_value, exact: true, n });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        two_sided_normal(((w - mean).abs() - 0.5) / var.sqrt())
    };
    Ok(Wilcoxon { w, p_value, exact: false, n })
}
