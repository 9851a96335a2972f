use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Combined sample size up to which tie-free samples get an exact p-value.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum WilcoxonError {
    #[error("each sample needs at least 2 values (got {n_a} and {n_b})")]
    TooFewSamples { n_a: usize, n_b: usize },
    #[error("samples contain a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Rank sum of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub n_a: usize,
    pub n_b: usize,
}

impl RankSumTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Average ranks (1-based) of the pooled sample and the sizes of tie groups.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for p in &pooled[i..=j] {
            ranks[p.1] = avg;
        }
        if j > i {
            tie_sizes.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, tie_sizes)
}

fn check(a: &[f64], b: &[f64]) -> Result<(), WilcoxonError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(WilcoxonError::TooFewSamples { n_a: a.len(), n_b: b.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(WilcoxonError::NonFinite);
    }
    Ok(())
}

/// Two-sided rank-sum test. Exact when the samples are tie-free and
/// `n_a + n_b <= 20`, normal approximation otherwise.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest, WilcoxonError> {
    check(a, b)?;
    let (_, ties) = pooled_ranks(a, b);
    if ties.is_empty() && a.len() + b.len() <= EXACT_MAX_N {
        exact(a, b)
    } else {
        normal(a, b)
    }
}

/// Exact null distribution of the rank sum; requires tie-free samples.
pub fn exact(a: &[f64], b: &[f64]) -> Result<RankSumTest, WilcoxonError> {
    check(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    assert!(ties.is_empty(), "exact rank-sum test needs tie-free samples");
    let (n_a, n_b) = (a.len(), b.len());
    let w = ranks[..n_a].iter().sum::<f64>().round() as usize;
    let counts = rank_sum_counts(n_a, n_a + n_b);
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    let lower: f64 = counts[..=w].iter().map(|&c| c as f64).sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().map(|&c| c as f64).sum::<f64>() / total;
    Ok(RankSumTest {
        statistic: w as f64,
        p_value: (2.0 * lower.min(upper)).min(1.0),
        method: Method::Exact,
        n_a,
        n_b,
    })
}

/// `counts[s]` = number of `k`-subsets of `{1..n}` summing to `s`.
fn rank_sum_counts(k: usize, n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    // table[j][s]: j-subsets of the ranks seen so far summing to s
    let mut table = vec![vec![0u64; max + 1]; k + 1];
    table[0][0] = 1;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max).rev() {
                table[j][s] += table[j - 1][s - r];
            }
        }
    }
    table.swap_remove(k)
}

/// Normal approximation with tie correction and a 0.5 continuity
/// correction.
pub fn normal(a: &[f64], b: &[f64]) -> Result<RankSumTest, WilcoxonError> {
    check(a, b)?;
    let (ranks, ties) = pooled_ranks(a, b);
    let (n_a, n_b) = (a.len() as f64, b.len() as f64);
    let n = n_a + n_b;
    let w: f64 = ranks[..a.len()].iter().sum();
    let mean = n_a * (n + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = n_a * n_b / 12.0 * ((n + 1.0) - tie_term);
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
        (2.0 * (1.0 - std_normal.cdf(z))).min(1.0)
    };
    Ok(RankSumTest { statistic: w, p_value, method: Method::Normal, n_a: a.len(), n_b: b.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_separated_three_by_three() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.method, Method::Exact);
        assert_eq!(t.statistic, 6.0);
        assert!((t.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn too_few() {
        assert_eq!(
            wilcoxon_rank_sum(&[1.0], &[2.0, 3.0]),
            Err(WilcoxonError::TooFewSamples { n_a: 1, n_b: 2 })
        );
    }

    #[test]
    fn counts_sum_to_binomial() {
        let c = rank_sum_counts(10, 20);
        assert_eq!(c.iter().sum::<u64>(), 184_756);
    }

    #[test]
    fn large_samples_use_normal() {
        let a: Vec<f64> = (0..15).map(f64::from).collect();
        let b: Vec<f64> = (100..110).map(f64::from).collect();
        let t = wilcoxon_rank_sum(&a, &b).unwrap();
        assert_eq!(t.method, Method::Normal);
        assert!(t.p_value < 1e-3);
    }

    #[test]
    fn all_tied_is_not_significant() {
        let t = wilcoxon_rank_sum(&[0.5; 4], &[0.5; 5]).unwrap();
        assert_eq!(t.p_value, 1.0);
    }
}
