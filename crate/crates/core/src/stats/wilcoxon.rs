use super::special::normal_sf;
use super::{average_ranks, TestMethod, TestResult};
use crate::{Error, Result};

/// Largest number of nonzero differences handled by the exact distribution.
pub const EXACT_LIMIT: usize = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. The statistic is `min(W+, W-)` over average
/// ranks of `|a - b|`. Up to [`EXACT_LIMIT`] pairs the p-value is the exact
/// probability, under random signs, of a statistic at most as large as
/// observed; beyond that a normal approximation with tie-corrected variance
/// and continuity correction is used.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<TestResult> {
    if pairs.is_empty() {
        return Err(Error::invalid("wilcoxon test needs at least one pair"));
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::invalid("wilcoxon test values must be finite"));
    }
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let zeros_dropped = pairs.len() - diffs.len();
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            dof: None,
            method: TestMethod::WilcoxonExact,
            n: 0,
            degenerate: true,
            zeros_dropped,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);

    let (p_value, method) = if n <= EXACT_LIMIT {
        (exact_p(&ranks, statistic), TestMethod::WilcoxonExact)
    } else {
        (
            normal_p(&abs, &ranks, statistic),
            TestMethod::WilcoxonNormal,
        )
    };
    Ok(TestResult {
        statistic,
        p_value,
        dof: None,
        method,
        n,
        degenerate: false,
        zeros_dropped,
    })
}

/// Distribution of the positive-rank sum over all 2^n sign patterns, on
/// doubled ranks so that half-integer tie ranks stay integral.
fn exact_p(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = (statistic * 2.0).round() as usize;
    let hits: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(total - s) <= observed)
        .map(|(_, c)| c)
        .sum();
    (hits as f64 / 2f64.powi(ranks.len() as i32)).min(1.0)
}

fn normal_p(abs: &[f64], ranks: &[f64], statistic: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((mean - statistic).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * normal_sf(z)).clamp(0.0, 1.0)
}
