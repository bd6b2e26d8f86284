//! Dataset similarity, recommenders and regret evaluation.

mod distance;
mod greedy;
mod knd;
mod matrix;
mod regret;

pub use distance::{dataset_distance, nearest_datasets, spearman, Standardizer};
pub use greedy::{build_greedy_portfolio, portfolio_objective, GreedyPlan, Portfolio};
pub use knd::{knd_recommend, recommend, KndPlan, Recommendation, LANDMARK_AFTER};
pub use matrix::{ConfigId, ResultsMatrix};
pub use regret::{
    compare_sources, evaluate_regret, make_plan, DatasetCurves, Recommender, RegretCurve,
    SourceComparison, DEFAULT_HORIZON,
};

use crate::Result;

/// Stateful proposer over the columns of a results matrix. Proposals are
/// column indices and never repeat.
pub trait RecommendationPlan {
    fn next(&mut self) -> Option<usize>;
    /// Reports the value seen for a proposed config. Observing a config
    /// that was never proposed, or observing one twice, is an error.
    fn observe(&mut self, config: usize, value: f64) -> Result<()>;
}

/// Tracks proposal and observation state shared by the plans.
#[derive(Debug, Clone)]
pub(crate) struct Ledger {
    pub proposed: Vec<bool>,
    pub order: Vec<usize>,
    pub observed: Vec<(usize, f64)>,
    pub budget: usize,
}

impl Ledger {
    pub fn new(n_configs: usize, budget: usize) -> Self {
        Self {
            proposed: vec![false; n_configs],
            order: Vec::new(),
            observed: Vec::new(),
            budget,
        }
    }

    pub fn exhausted(&self) -> bool {
        self.order.len() >= self.budget.min(self.proposed.len())
    }

    pub fn propose(&mut self, c: usize) -> usize {
        debug_assert!(!self.proposed[c]);
        self.proposed[c] = true;
        self.order.push(c);
        c
    }

    pub fn observe(&mut self, c: usize, value: f64) -> Result<()> {
        if !self.proposed.get(c).copied().unwrap_or(false) {
            return Err(crate::Error::Contract(format!(
                "config {c} was never proposed"
            )));
        }
        if self.observed.iter().any(|(o, _)| *o == c) {
            return Err(crate::Error::Contract(format!(
                "config {c} already observed"
            )));
        }
        if !value.is_finite() {
            return Err(crate::Error::invalid("observed value must be finite"));
        }
        self.observed.push((c, value));
        Ok(())
    }
}
