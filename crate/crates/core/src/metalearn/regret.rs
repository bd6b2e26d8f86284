use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{knd_recommend, GreedyPlan, RecommendationPlan, ResultsMatrix};
use crate::metamodel::MetaFeatures;
use crate::metrics::ResultSource;
use crate::records::RunRecord;
use crate::{Error, Result};

pub const DEFAULT_HORIZON: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub values: Vec<f64>,
}

impl RegretCurve {
    pub fn final_regret(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Pointwise mean of equally long curves.
    pub fn mean_of(curves: &[&RegretCurve]) -> RegretCurve {
        let Some(first) = curves.first() else {
            return RegretCurve { values: vec![] };
        };
        let n = curves.len() as f64;
        let values = (0..first.values.len())
            .map(|t| curves.iter().map(|c| c.values[t]).sum::<f64>() / n)
            .collect();
        RegretCurve { values }
    }
}

/// Runs `plan` against one truth row for `horizon` steps.
///
/// Missing truth values are observed as `floor`. The reference best is the
/// maximum over all configs with the same substitution, so regret never
/// goes negative. A plan that runs out repeats its last value.
pub fn evaluate_regret(
    plan: &mut dyn RecommendationPlan,
    truth: &[Option<f64>],
    floor: f64,
    horizon: usize,
) -> Result<RegretCurve> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if truth.iter().all(Option::is_none) {
        return Err(Error::invalid("truth row has no values"));
    }
    let seen = |c: usize| truth[c].unwrap_or(floor);
    let best = (0..truth.len()).map(seen).fold(f64::NEG_INFINITY, f64::max);
    let mut best_seen = f64::NEG_INFINITY;
    let mut values = Vec::with_capacity(horizon);
    while values.len() < horizon {
        let Some(c) = plan.next() else { break };
        if c >= truth.len() {
            return Err(Error::Contract(format!("plan proposed unknown config {c}")));
        }
        let v = seen(c);
        plan.observe(c, v)?;
        best_seen = best_seen.max(v);
        values.push(best - best_seen);
    }
    let pad = values.last().copied().unwrap_or(best - floor.min(best));
    values.resize(horizon, pad);
    Ok(RegretCurve { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Recommender {
    Knd { k: usize },
    Greedy,
}

impl std::str::FromStr for Recommender {
    type Err = Error;

    /// `greedy`, `knd` (k = 5) or `knd:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "greedy" => Ok(Recommender::Greedy),
            None if s == "knd" => Ok(Recommender::Knd { k: 5 }),
            Some(("knd", k)) => k
                .parse()
                .map(|k| Recommender::Knd { k })
                .map_err(|_| Error::invalid(format!("bad k in '{s}'"))),
            _ => Err(Error::invalid(format!("unknown recommender '{s}'"))),
        }
    }
}

impl Recommender {
    pub fn name(self) -> &'static str {
        match self {
            Recommender::Knd { .. } => "knd",
            Recommender::Greedy => "greedy",
        }
    }
}

/// Builds a fresh plan trained on `train`. kND caps k at the corpus size.
pub fn make_plan(
    recommender: Recommender,
    query: &MetaFeatures,
    train: &ResultsMatrix,
    budget: usize,
) -> Result<Box<dyn RecommendationPlan>> {
    Ok(match recommender {
        Recommender::Knd { k } => {
            Box::new(knd_recommend(query, train, k.min(train.n_rows()), budget)?)
        }
        Recommender::Greedy => Box::new(GreedyPlan::new(train, budget)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCurves {
    pub dataset_id: String,
    pub first_run: RegretCurve,
    pub mean_aggregated: RegretCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceComparison {
    pub recommender: Recommender,
    pub horizon: usize,
    pub per_dataset: Vec<DatasetCurves>,
    pub mean_first_run: RegretCurve,
    pub mean_mean_aggregated: RegretCurve,
    pub excluded: Vec<(String, String)>,
}

impl SourceComparison {
    pub fn curves(&self, source: ResultSource) -> impl Iterator<Item = (&str, &RegretCurve)> {
        self.per_dataset.iter().map(move |d| {
            let c = match source {
                ResultSource::FirstRun => &d.first_run,
                ResultSource::MeanAggregated => &d.mean_aggregated,
            };
            (d.dataset_id.as_str(), c)
        })
    }

    /// `dataset_id,source,iteration,regret`; iterations start at 1. Mean
    /// curves use the dataset id `_mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset_id,source,iteration,regret\n");
        let mut emit = |d: &str, s: ResultSource, c: &RegretCurve| {
            for (t, r) in c.values.iter().enumerate() {
                let _ = writeln!(out, "{d},{},{},{r}", s.as_str(), t + 1);
            }
        };
        for d in &self.per_dataset {
            emit(&d.dataset_id, ResultSource::FirstRun, &d.first_run);
            emit(
                &d.dataset_id,
                ResultSource::MeanAggregated,
                &d.mean_aggregated,
            );
        }
        emit("_mean", ResultSource::FirstRun, &self.mean_first_run);
        emit(
            "_mean",
            ResultSource::MeanAggregated,
            &self.mean_mean_aggregated,
        );
        out
    }
}

/// Leave-one-dataset-out regret under both result sources. For each source
/// the training cells and the held-out truth row are collapsed the same way.
pub fn compare_sources(
    runs: &[RunRecord],
    meta: &BTreeMap<String, MetaFeatures>,
    metric_name: &str,
    recommender: Recommender,
    horizon: usize,
    floor: f64,
) -> Result<SourceComparison> {
    let first = ResultsMatrix::from_records(runs, metric_name, ResultSource::FirstRun, meta)?
        .with_floor(floor);
    let mean = ResultsMatrix::from_records(runs, metric_name, ResultSource::MeanAggregated, meta)?
        .with_floor(floor);
    if first.n_rows() < 2 {
        return Err(Error::InvalidState(format!(
            "need at least 2 datasets with '{metric_name}' results, found {}",
            first.n_rows()
        )));
    }
    // Both matrices come from the same groups, so rows and columns align.
    debug_assert_eq!(first.datasets, mean.datasets);

    let mut per_dataset = Vec::new();
    let mut excluded = Vec::new();
    for (i, ds) in first.datasets.iter().enumerate() {
        if first.cells[i].iter().all(Option::is_none) {
            excluded.push((ds.clone(), "no usable configs".to_string()));
            continue;
        }
        let run = |m: &ResultsMatrix| -> Result<RegretCurve> {
            let train = m.without_row(i);
            let mut plan = make_plan(recommender, &m.meta[i], &train, horizon)?;
            evaluate_regret(plan.as_mut(), &m.cells[i], floor, horizon)
        };
        per_dataset.push(DatasetCurves {
            dataset_id: ds.clone(),
            first_run: run(&first)?,
            mean_aggregated: run(&mean)?,
        });
    }
    let mean_first_run =
        RegretCurve::mean_of(&per_dataset.iter().map(|d| &d.first_run).collect::<Vec<_>>());
    let mean_mean_aggregated = RegretCurve::mean_of(
        &per_dataset
            .iter()
            .map(|d| &d.mean_aggregated)
            .collect::<Vec<_>>(),
    );
    Ok(SourceComparison {
        recommender,
        horizon,
        per_dataset,
        mean_first_run,
        mean_mean_aggregated,
        excluded,
    })
}
