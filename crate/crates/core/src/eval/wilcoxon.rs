use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::metrics::ranks;
use crate::{Error, Result};

pub const MIN_SAMPLES: usize = 3;
pub const ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSumMethod {
    Exact,
    Normal,
}

/// Outcome of the two one-sided rank-sum tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// `1` when `a` is significantly larger, `-1` when `b` is, else `0`.
    pub verdict: i8,
    /// One-sided p-value for `a > b`.
    pub p_greater: f64,
    /// One-sided p-value for `a < b`.
    pub p_less: f64,
    /// Rank sum of `a` over the pooled sample.
    pub rank_sum: f64,
    pub method: RankSumMethod,
}

/// The exact null distribution is used when the smaller sample has fewer
/// than 10 values and the pooled size is below 20; otherwise the normal
/// approximation with tie and continuity corrections.
pub fn wilcoxon_ranksum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return Err(Error::arg(format!(
            "rank-sum test needs at least {MIN_SAMPLES} values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank-sum sample".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let rank_sum: f64 = r[..a.len()].iter().sum();
    let exact = a.len().min(b.len()) < 10 && pooled.len() < 20;
    let (p_greater, p_less) = if exact {
        exact_tails(&r, a.len(), rank_sum)
    } else {
        normal_tails(&pooled, a.len(), b.len(), rank_sum)
    };
    let verdict = if p_greater < ALPHA {
        1
    } else if p_less < ALPHA {
        -1
    } else {
        0
    };
    Ok(RankSumTest {
        verdict,
        p_greater,
        p_less,
        rank_sum,
        method: if exact { RankSumMethod::Exact } else { RankSumMethod::Normal },
    })
}

/// Tail probabilities of the rank sum of a size-`na` subset, counted over
/// doubled (integer) midranks.
fn exact_tails(r: &[f64], na: usize, rank_sum: f64) -> (f64, f64) {
    let doubled: Vec<usize> = r.iter().map(|v| (2.0 * v).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled sum s
    let mut counts = vec![vec![0f64; total + 1]; na + 1];
    counts[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=na).rev() {
            for s in (d..=total).rev() {
                counts[k][s] += counts[k - 1][s - d];
            }
        }
    }
    let observed = (2.0 * rank_sum).round() as usize;
    let all: f64 = counts[na].iter().sum();
    let ge: f64 = counts[na][observed..].iter().sum();
    let le: f64 = counts[na][..=observed].iter().sum();
    (ge / all, le / all)
}

fn normal_tails(pooled: &[f64], na: usize, nb: usize, rank_sum: f64) -> (f64, f64) {
    let n = (na + nb) as f64;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let mean = na as f64 * (n + 1.0) / 2.0;
    let var = na as f64 * nb as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return (1.0, 1.0);
    }
    let sd = var.sqrt();
    let z = Normal::new(0.0, 1.0).expect("unit normal");
    let p_greater = 1.0 - z.cdf((rank_sum - mean - 0.5) / sd);
    let p_less = z.cdf((rank_sum - mean + 0.5) / sd);
    (p_greater.min(1.0), p_less.min(1.0))
}
