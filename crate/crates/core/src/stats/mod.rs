//! Nonparametric tests and the ranking-variability report.

mod friedman;
pub mod special;
mod variability;
mod wilcoxon;

pub use friedman::friedman_test;
pub use variability::{
    variability_report, Comparison, ExternalResults, SignificanceSummary, VariabilityMode,
    VariabilityReport,
};
pub use wilcoxon::{wilcoxon_signed_rank, EXACT_LIMIT};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Friedman,
    WilcoxonExact,
    WilcoxonNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: Option<u32>,
    pub method: TestMethod,
    /// Observations that entered the test (blocks, or nonzero pairs).
    pub n: usize,
    /// Set when no information was available (e.g. all differences zero).
    #[serde(default)]
    pub degenerate: bool,
    /// Zero differences dropped before a signed-rank test.
    #[serde(default)]
    pub zeros_dropped: usize,
}

/// Ranks starting at 1, averaging over ties.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}
