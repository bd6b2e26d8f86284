use serde::{Deserialize, Serialize};

use super::{ConfigId, Ledger, RecommendationPlan, ResultsMatrix};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    /// Column indices into the training matrix, in selection order.
    pub indices: Vec<usize>,
    pub configs: Vec<ConfigId>,
}

/// Sum over rows of the best value any config in `chosen` reaches, with the
/// matrix floor as the starting point of every row.
pub fn portfolio_objective(m: &ResultsMatrix, chosen: &[usize]) -> f64 {
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

/// Greedy forward selection under `portfolio_objective`. Ties go to the
/// lower column index. Selection stops early once nothing adds gain.
pub fn build_greedy_portfolio(train: &ResultsMatrix, s: usize) -> Portfolio {
    let s = s.min(train.n_configs());
    let mut best: Vec<f64> = vec![train.floor; train.n_rows()];
    let mut taken = vec![false; train.n_configs()];
    let mut indices = Vec::with_capacity(s);
    while indices.len() < s {
        let mut pick: Option<(usize, f64)> = None;
        for c in (0..train.n_configs()).filter(|&c| !taken[c]) {
            let gain: f64 = train
                .cells
                .iter()
                .zip(&best)
                .map(|(row, b)| row[c].map_or(0.0, |v| (v - b).max(0.0)))
                .sum();
            if pick.is_none_or(|(_, g)| gain > g) {
                pick = Some((c, gain));
            }
        }
        let Some((c, gain)) = pick else { break };
        if gain <= 0.0 && !indices.is_empty() {
            break;
        }
        taken[c] = true;
        indices.push(c);
        for (row, b) in train.cells.iter().zip(best.iter_mut()) {
            if let Some(v) = row[c] {
                *b = b.max(v);
            }
        }
    }
    Portfolio {
        configs: indices.iter().map(|&c| train.configs[c].clone()).collect(),
        indices,
    }
}

/// Proposes the greedy portfolio in order, then the remaining configs by
/// corpus mean. Observations do not change the order.
#[derive(Debug, Clone)]
pub struct GreedyPlan {
    order: Vec<usize>,
    pos: usize,
    ledger: Ledger,
}

impl GreedyPlan {
    pub fn new(train: &ResultsMatrix, budget: usize) -> Self {
        let portfolio = build_greedy_portfolio(train, budget);
        let mut order = portfolio.indices;
        let mut seen = vec![false; train.n_configs()];
        for &c in &order {
            seen[c] = true;
        }
        order.extend(train.best_first_by_mean().into_iter().filter(|&c| !seen[c]));
        Self {
            order,
            pos: 0,
            ledger: Ledger::new(train.n_configs(), budget),
        }
    }
}

impl RecommendationPlan for GreedyPlan {
    fn next(&mut self) -> Option<usize> {
        if self.ledger.exhausted() || self.pos >= self.order.len() {
            return None;
        }
        let c = self.order[self.pos];
        self.pos += 1;
        Some(self.ledger.propose(c))
    }

    fn observe(&mut self, config: usize, value: f64) -> Result<()> {
        self.ledger.observe(config, value)
    }
}
