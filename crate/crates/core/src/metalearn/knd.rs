use serde::{Deserialize, Serialize};

use super::distance::{row_distances, spearman};
use super::{ConfigId, Ledger, RecommendationPlan, ResultsMatrix};
use crate::metamodel::MetaFeatures;
use crate::{Error, Result};

/// Observations after which neighbours are re-scored by landmarking.
pub const LANDMARK_AFTER: usize = 3;

/// k-nearest-dataset recommender.
///
/// Neighbours are taken round-robin; each turn proposes the neighbour's
/// best config not yet proposed. Once `LANDMARK_AFTER` values have been
/// observed, every corpus row is re-scored by `1 - spearman` between the
/// observed values and that row's values on the same configs, and the k
/// closest rows under that score become the neighbours. When the
/// neighbours run dry, remaining configs follow the corpus-mean order.
#[derive(Debug, Clone)]
pub struct KndPlan {
    corpus: ResultsMatrix,
    k: usize,
    meta_distance: Vec<f64>,
    neighbours: Vec<usize>,
    cursor: usize,
    fallback: Vec<usize>,
    ledger: Ledger,
}

pub fn knd_recommend(
    query: &MetaFeatures,
    corpus: &ResultsMatrix,
    k: usize,
    budget: usize,
) -> Result<KndPlan> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if corpus.n_rows() < k {
        return Err(Error::invalid(format!(
            "corpus has {} datasets, fewer than k = {k}",
            corpus.n_rows()
        )));
    }
    let meta_distance = row_distances(query, corpus)?;
    let mut plan = KndPlan {
        k,
        neighbours: Vec::new(),
        cursor: 0,
        fallback: corpus.best_first_by_mean(),
        ledger: Ledger::new(corpus.n_configs(), budget),
        meta_distance,
        corpus: corpus.clone(),
    };
    plan.neighbours = plan.closest(&plan.meta_distance.clone());
    Ok(plan)
}

impl KndPlan {
    pub fn neighbours(&self) -> Vec<&str> {
        self.neighbours
            .iter()
            .map(|&r| self.corpus.datasets[r].as_str())
            .collect()
    }

    /// Indices of the k smallest scores. Ties fall back to meta-feature
    /// distance, then row order.
    fn closest(&self, score: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..score.len()).collect();
        idx.sort_by(|&a, &b| {
            score[a]
                .total_cmp(&score[b])
                .then(self.meta_distance[a].total_cmp(&self.meta_distance[b]))
                .then(a.cmp(&b))
        });
        idx.truncate(self.k);
        idx
    }

    fn best_unproposed(&self, row: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (c, v) in self.corpus.cells[row].iter().enumerate() {
            let Some(v) = *v else { continue };
            if self.ledger.proposed[c] {
                continue;
            }
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((c, v));
            }
        }
        best.map(|(c, _)| c)
    }

    fn landmark(&mut self) {
        let score: Vec<f64> = (0..self.corpus.n_rows())
            .map(|r| {
                let (x, y): (Vec<f64>, Vec<f64>) = self
                    .ledger
                    .observed
                    .iter()
                    .filter_map(|&(c, v)| self.corpus.cells[r][c].map(|cv| (v, cv)))
                    .unzip();
                1.0 - spearman(&x, &y)
            })
            .collect();
        self.neighbours = self.closest(&score);
        self.cursor = 0;
    }
}

impl RecommendationPlan for KndPlan {
    fn next(&mut self) -> Option<usize> {
        if self.ledger.exhausted() {
            return None;
        }
        let n = self.neighbours.len();
        for step in 0..n {
            let row = self.neighbours[(self.cursor + step) % n];
            if let Some(c) = self.best_unproposed(row) {
                self.cursor = (self.cursor + step + 1) % n;
                return Some(self.ledger.propose(c));
            }
        }
        let c = self
            .fallback
            .iter()
            .copied()
            .find(|&c| !self.ledger.proposed[c])?;
        Some(self.ledger.propose(c))
    }

    fn observe(&mut self, config: usize, value: f64) -> Result<()> {
        self.ledger.observe(config, value)?;
        if self.ledger.observed.len() >= LANDMARK_AFTER {
            self.landmark();
        }
        Ok(())
    }
}

/// A config suggested for a new dataset, with the mean value it reached on
/// the neighbours that ran it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub config: ConfigId,
    pub expected_score: Option<f64>,
}

/// First `n` proposals of a fresh kND plan.
pub fn recommend(
    query: &MetaFeatures,
    corpus: &ResultsMatrix,
    k: usize,
    n: usize,
) -> Result<(Vec<Recommendation>, Vec<String>)> {
    let k = k.min(corpus.n_rows());
    let mut plan = knd_recommend(query, corpus, k, n)?;
    let neighbours: Vec<usize> = plan.neighbours.clone();
    let mut out = Vec::new();
    while let Some(c) = plan.next() {
        let vals: Vec<f64> = neighbours
            .iter()
            .filter_map(|&r| corpus.cells[r][c])
            .collect();
        out.push(Recommendation {
            config: corpus.configs[c].clone(),
            expected_score: (!vals.is_empty())
                .then(|| vals.iter().sum::<f64>() / vals.len() as f64),
        });
    }
    let names = neighbours
        .iter()
        .map(|&r| corpus.datasets[r].clone())
        .collect();
    Ok((out, names))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn corpus(rows: &[(&str, u64, &[f64])]) -> ResultsMatrix {
        let mut cells = Vec::new();
        let mut meta = BTreeMap::new();
        for (d, n, vals) in rows {
            meta.insert(
                d.to_string(),
                MetaFeatures {
                    n_instances: Some(*n),
                    ..Default::default()
                },
            );
            for (c, v) in vals.iter().enumerate() {
                cells.push((d.to_string(), ConfigId::new("p", format!("c{c}")), *v));
            }
        }
        ResultsMatrix::from_cells(cells, &meta).unwrap()
    }

    #[test]
    fn identical_query_proposes_nearest_argmax() {
        let m = corpus(&[
            ("a", 100, &[0.1, 0.9, 0.3]),
            ("b", 500, &[0.8, 0.1, 0.2]),
            ("c", 900, &[0.2, 0.3, 0.7]),
        ]);
        let q = m.meta[1].clone();
        let mut plan = knd_recommend(&q, &m, 1, 3).unwrap();
        assert_eq!(plan.next(), Some(0));
    }

    #[test]
    fn identical_rows_give_global_order() {
        let m = corpus(&[
            ("a", 1, &[0.1, 0.9, 0.3, 0.5]),
            ("b", 2, &[0.1, 0.9, 0.3, 0.5]),
            ("c", 3, &[0.1, 0.9, 0.3, 0.5]),
        ]);
        let mut plan = knd_recommend(&MetaFeatures::default(), &m, 3, 10).unwrap();
        let mut got = Vec::new();
        while let Some(c) = plan.next() {
            plan.observe(c, 0.0).unwrap();
            got.push(c);
        }
        assert_eq!(got, vec![1, 3, 2, 0]);
    }

    #[test]
    fn observe_unproposed_is_contract_violation() {
        let m = corpus(&[("a", 1, &[0.1, 0.2]), ("b", 2, &[0.2, 0.1])]);
        let mut plan = knd_recommend(&MetaFeatures::default(), &m, 1, 2).unwrap();
        assert!(matches!(plan.observe(0, 0.5), Err(Error::Contract(_))));
        let c = plan.next().unwrap();
        plan.observe(c, 0.5).unwrap();
        assert!(matches!(plan.observe(c, 0.5), Err(Error::Contract(_))));
    }

    #[test]
    fn landmarking_switches_to_correlated_row() {
        // Query resembles "a" by meta-features but behaves like "b".
        let m = corpus(&[
            ("a", 100, &[0.9, 0.8, 0.7, 0.1, 0.2]),
            ("b", 1000, &[0.1, 0.2, 0.3, 0.9, 0.8]),
        ]);
        let q = m.meta[0].clone();
        let mut plan = knd_recommend(&q, &m, 1, 5).unwrap();
        let truth = [0.1, 0.2, 0.3, 0.9, 0.8];
        let mut seen = Vec::new();
        for _ in 0..LANDMARK_AFTER {
            let c = plan.next().unwrap();
            seen.push(c);
            plan.observe(c, truth[c]).unwrap();
        }
        assert_eq!(seen, vec![0, 1, 2]);
        assert_eq!(plan.neighbours(), vec!["b"]);
        assert_eq!(plan.next(), Some(3));
    }

    #[test]
    fn recommend_reports_neighbour_means() {
        let m = corpus(&[("a", 1, &[0.2, 0.6]), ("b", 1, &[0.4, 0.2])]);
        let (recs, nb) = recommend(&MetaFeatures::default(), &m, 2, 2).unwrap();
        assert_eq!(nb, vec!["a", "b"]);
        assert_eq!(recs[0].config, ConfigId::new("p", "c1"));
        assert!((recs[0].expected_score.unwrap() - 0.4).abs() < 1e-12);
    }
}
