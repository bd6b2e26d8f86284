//! Brute-force reference implementations used to check the library.
//!
//! Everything here favours obviousness over speed.

use std::collections::HashMap;

use lde_core::metalearn::ResultsMatrix;
use lde_core::stats::average_ranks;
use rand::Rng;

/// Exact Friedman p-value under independent uniform permutations of the
/// ranks within each block. Works on the distribution of the column rank
/// sums, built one block at a time.
pub fn friedman_exact_p(blocks: &[Vec<f64>]) -> f64 {
    let k = blocks[0].len();
    let ranks: Vec<Vec<i64>> = blocks
        .iter()
        .map(|b| {
            average_ranks(b)
                .iter()
                .map(|r| (r * 2.0).round() as i64)
                .collect()
        })
        .collect();
    let perms = permutations(k);
    let mut dist: HashMap<Vec<i64>, f64> = HashMap::from([(vec![0; k], 1.0)]);
    for r in &ranks {
        let w = 1.0 / perms.len() as f64;
        let mut next: HashMap<Vec<i64>, f64> = HashMap::new();
        for (sums, p) in &dist {
            for perm in &perms {
                let s: Vec<i64> = (0..k).map(|j| sums[j] + r[perm[j]]).collect();
                *next.entry(s).or_default() += p * w;
            }
        }
        dist = next;
    }
    // Chi-square is increasing in the sum of squared rank sums.
    let ss = |s: &[i64]| s.iter().map(|x| x * x).sum::<i64>();
    let mut observed = vec![0; k];
    for r in &ranks {
        for j in 0..k {
            observed[j] += r[j];
        }
    }
    let obs = ss(&observed);
    dist.iter()
        .filter(|(s, _)| ss(s) >= obs)
        .map(|(_, p)| p)
        .sum()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn signed_rank_setup(diffs: &[f64]) -> (Vec<f64>, f64, f64) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    (ranks, total, w_plus.min(total - w_plus))
}

/// Two-sided signed-rank p by visiting all 2^n sign patterns.
pub fn wilcoxon_enumerated_p(diffs: &[f64]) -> (f64, f64) {
    let (ranks, total, stat) = signed_rank_setup(diffs);
    let n = ranks.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if s.min(total - s) <= stat + 1e-9 {
            hits += 1;
        }
    }
    (stat, hits as f64 / (1u64 << n) as f64)
}

/// Two-sided signed-rank p from `flips` random sign patterns.
pub fn wilcoxon_monte_carlo_p<R: Rng>(diffs: &[f64], flips: usize, rng: &mut R) -> f64 {
    let (ranks, total, stat) = signed_rank_setup(diffs);
    let mut hits = 0usize;
    for _ in 0..flips {
        let s: f64 = ranks.iter().filter(|_| rng.random_bool(0.5)).sum();
        if s.min(total - s) <= stat + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / flips as f64
}

/// Sum over rows of the best chosen cell, never below the floor.
pub fn coverage(m: &ResultsMatrix, chosen: &[usize]) -> f64 {
    m.cells
        .iter()
        .map(|row| {
            chosen
                .iter()
                .filter_map(|&c| row[c])
                .fold(m.floor, f64::max)
        })
        .sum()
}

/// Best coverage over every `s`-subset of the columns.
pub fn exhaustive_portfolio(m: &ResultsMatrix, s: usize) -> (Vec<usize>, f64) {
    let n = m.n_configs();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut combo: Vec<usize> = (0..s).collect();
    loop {
        let v = coverage(m, &combo);
        if v > best.1 {
            best = (combo.clone(), v);
        }
        // Advance to the next combination in lexicographic order.
        let Some(i) = (0..s).rev().find(|&i| combo[i] < n - s + i) else {
            return best;
        };
        combo[i] += 1;
        for j in i + 1..s {
            combo[j] = combo[j - 1] + 1;
        }
    }
}
