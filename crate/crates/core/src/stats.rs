//! Nonparametric comparison of methods across subjects: Friedman test,
//! Wilcoxon signed-rank post-hoc tests and Bonferroni correction.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest number of nonzero differences for which the Wilcoxon p-value is
/// computed by exact enumeration instead of the normal approximation.
pub const EXACT_WILCOXON_MAX: usize = 12;

/// Subjects × methods accuracy matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodMatrix {
    accuracies: Array2<f64>,
}

impl MethodMatrix {
    pub fn new(accuracies: Array2<f64>) -> Result<Self> {
        let (s, c) = accuracies.dim();
        if s < 2 || c < 2 {
            return Err(Error::Dimension(format!("need at least 2 subjects and 2 methods, got {s}x{c}")));
        }
        if let Some(((i, j), v)) = accuracies
            .indexed_iter()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::Data(format!("accuracy at subject {i}, method {j} is {v}, outside [0, 1]")));
        }
        Ok(MethodMatrix { accuracies })
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.accuracies.view()
    }

    pub fn n_subjects(&self) -> usize {
        self.accuracies.nrows()
    }

    pub fn n_methods(&self) -> usize {
        self.accuracies.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// 1-based ranks with ties sharing their mean rank, plus the sizes of the
/// tie groups (only groups of size > 1).
pub fn mid_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Friedman test on the columns of `m`, ranking within each row.
///
/// The statistic is `12 S / (C (C+1)) Σ_j (R̄_j - (C+1)/2)²` divided by the
/// usual tie correction `1 - Σ (t³ - t) / (S (C³ - C))`; it is referred to
/// χ² with `C - 1` degrees of freedom. If every row is fully tied the
/// statistic is 0 and `p = 1`.
pub fn friedman(m: &MethodMatrix) -> Result<TestResult> {
    let a = m.view();
    let (s, c) = a.dim();
    if c < 3 {
        log::warn!("Friedman test on {c} methods reduces to a sign-test-like comparison");
    }
    let mut rank_sums = vec![0.0; c];
    let mut tie_term = 0.0;
    for row in a.rows() {
        let (ranks, ties) = mid_ranks(&row.to_vec());
        for (sum, r) in rank_sums.iter_mut().zip(&ranks) {
            *sum += r;
        }
        tie_term += ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let (sf, cf) = (s as f64, c as f64);
    let centre = (cf + 1.0) / 2.0;
    let spread: f64 = rank_sums.iter().map(|r| (r / sf - centre).powi(2)).sum();
    let raw = 12.0 * sf / (cf * (cf + 1.0)) * spread;
    let correction = 1.0 - tie_term / (sf * (cf * cf * cf - cf));
    if correction <= 1e-12 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0 });
    }
    let statistic = raw / correction;
    let chi = ChiSquared::new(cf - 1.0).map_err(|e| Error::Numerical(format!("chi-squared distribution: {e}")))?;
    Ok(TestResult {
        statistic,
        p_value: chi.sf(statistic).clamp(0.0, 1.0),
    })
}

/// Wilcoxon signed-rank test of `a` against `b` (paired).
///
/// `statistic` is the z value of `W⁺` under the normal approximation with
/// continuity and tie corrections; it is positive when `a` tends to exceed
/// `b`. The two-sided p-value uses the same approximation, except that with
/// at most [`EXACT_WILCOXON_MAX`] nonzero differences it is computed
/// exactly by enumerating all sign assignments of the (mid-)ranks.
pub fn wilcoxon_signed_rank(a: &ArrayView1<f64>, b: &ArrayView1<f64>) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("paired samples of lengths {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("paired samples contain non-finite values".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0 });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = mid_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let dev = w_plus - mean;
    let z = if var <= 0.0 || dev.abs() <= 0.5 {
        0.0
    } else {
        (dev - 0.5 * dev.signum()) / var.sqrt()
    };
    let p_value = if n <= EXACT_WILCOXON_MAX {
        exact_signed_rank_p(&ranks, w_plus)
    } else {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z.abs())).min(1.0)
    };
    Ok(TestResult { statistic: z, p_value })
}

/// Two-sided exact p-value: probability, over all `2ⁿ` equally likely sign
/// assignments, that `|W⁺ - E W⁺|` is at least the observed deviation.
fn exact_signed_rank_p(ranks: &[f64], w_plus: f64) -> f64 {
    // Mid-ranks are multiples of 1/2, so doubled ranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed = (2.0 * w_plus).round() as i64;
    let centre2 = total as i64; // 2 · (2 E W⁺) = total
    let dev = (2 * observed - centre2).abs();
    let all = 2f64.powi(ranks.len() as i32);
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (2 * *s as i64 - centre2).abs() >= dev)
        .map(|(_, c)| c)
        .sum();
    (extreme / all).min(1.0)
}

/// `min(1, p · m)` for every p-value.
pub fn bonferroni(p_values: &[f64], m_comparisons: usize) -> Vec<f64> {
    let m = m_comparisons.max(1) as f64;
    p_values.iter().map(|p| (p * m).min(1.0)).collect()
}

/// One post-hoc comparison of two methods over the same subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub method_a: String,
    pub method_b: String,
    pub n_subjects: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub z: f64,
    pub p_value: f64,
    /// Bonferroni-adjusted over all comparisons of the same call.
    pub p_adjusted: f64,
}

/// Wilcoxon tests for the given column pairs of `m`, Bonferroni-corrected
/// over `pairs.len()` comparisons.
pub fn pairwise_wilcoxon(m: &MethodMatrix, names: &[String], pairs: &[(usize, usize)]) -> Result<Vec<PairwiseComparison>> {
    if names.len() != m.n_methods() {
        return Err(Error::Dimension(format!("{} method names for {} columns", names.len(), m.n_methods())));
    }
    let a = m.view();
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i >= m.n_methods() || j >= m.n_methods() {
            return Err(Error::Dimension(format!("method pair ({i}, {j}) out of range")));
        }
        let t = wilcoxon_signed_rank(&a.column(i), &a.column(j))?;
        out.push(PairwiseComparison {
            method_a: names[i].clone(),
            method_b: names[j].clone(),
            n_subjects: m.n_subjects(),
            mean_a: a.column(i).mean().unwrap_or(f64::NAN),
            mean_b: a.column(j).mean().unwrap_or(f64::NAN),
            z: t.statistic,
            p_value: t.p_value,
            p_adjusted: f64::NAN,
        });
    }
    let adjusted = bonferroni(&out.iter().map(|c| c.p_value).collect::<Vec<_>>(), pairs.len());
    for (c, p) in out.iter_mut().zip(adjusted) {
        c.p_adjusted = p;
    }
    Ok(out)
}
