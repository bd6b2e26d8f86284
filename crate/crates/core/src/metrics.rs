//! Normalized metrics, per-experiment aggregation and rankings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::records::RunRecord;
use crate::{Error, Result};

/// How the runs of one experiment collapse into a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultSource {
    /// The run with the smallest (dataset_params_id, repeat_index).
    FirstRun,
    MeanAggregated,
}

impl std::str::FromStr for ResultSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_run" | "first" => Ok(ResultSource::FirstRun),
            "mean_aggregated" | "mean" => Ok(ResultSource::MeanAggregated),
            _ => Err(Error::invalid(format!("unknown result source '{s}'"))),
        }
    }
}

impl ResultSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ResultSource::FirstRun => "first_run",
            ResultSource::MeanAggregated => "mean_aggregated",
        }
    }
}

/// Accuracy rescaled so that uniform random guessing over `n_classes`
/// maps to 0 and perfect accuracy to 1.
pub fn normalized_accuracy(raw_accuracy: f64, n_classes: u32) -> Result<f64> {
    if n_classes < 2 {
        return Err(Error::invalid(
            "normalized accuracy needs at least 2 classes",
        ));
    }
    let chance = 1.0 / n_classes as f64;
    Ok((raw_accuracy - chance) / (1.0 - chance))
}

/// Variant with the majority-class rate as the zero point.
pub fn normalized_accuracy_majority(raw_accuracy: f64, majority_ratio: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&majority_ratio) {
        return Err(Error::invalid("majority ratio must lie in [0, 1)"));
    }
    Ok((raw_accuracy - majority_ratio) / (1.0 - majority_ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyField {
    Dataset,
    DatasetParams,
    Pipeline,
    PipelineParams,
    InputTrainedPipeline,
}

impl KeyField {
    fn project(self, r: &RunRecord) -> String {
        match self {
            KeyField::Dataset => r.dataset_id.clone(),
            KeyField::DatasetParams => r.dataset_params_id.clone(),
            KeyField::Pipeline => r.pipeline_id.clone(),
            KeyField::PipelineParams => r.pipeline_params_id.clone(),
            KeyField::InputTrainedPipeline => {
                r.input_trained_pipeline_id.clone().unwrap_or_default()
            }
        }
    }
}

pub type GroupKey = BTreeMap<KeyField, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: GroupKey,
    pub metric_name: String,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single run.
    pub std: f64,
    pub count: usize,
    pub first: f64,
}

/// Mean computed around the first element, so identical values return
/// that value exactly.
pub fn mean(xs: &[f64]) -> f64 {
    let Some(&x0) = xs.first() else {
        return f64::NAN;
    };
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Groups runs by the projection onto `group` and summarizes `metric_name`.
/// Failed runs are skipped; a completed run without the metric is an error.
pub fn aggregate_metric(
    runs: &[RunRecord],
    metric_name: &str,
    group: &[KeyField],
) -> Result<Vec<AggregateRow>> {
    let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in runs.iter().filter(|r| !r.failed()) {
        if !r.metrics.contains_key(metric_name) {
            return Err(Error::invalid(format!(
                "run {} has no metric '{metric_name}'",
                r.run_id
            )));
        }
        let key = group.iter().map(|&f| (f, f.project(r))).collect();
        groups.entry(key).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(key, mut members)| {
            members.sort_by(|a, b| a.first_key().cmp(&b.first_key()));
            let values: Vec<f64> = members.iter().map(|r| r.metrics[metric_name]).collect();
            AggregateRow {
                key,
                metric_name: metric_name.to_string(),
                mean: mean(&values),
                std: sample_std(&values),
                count: values.len(),
                first: values[0],
            }
        })
        .collect())
}

/// Collapses a group of runs into one value. Runs lacking the metric are ignored.
pub fn collapse(runs: &[&RunRecord], metric_name: &str, source: ResultSource) -> Option<f64> {
    let mut with: Vec<&RunRecord> = runs
        .iter()
        .copied()
        .filter(|r| r.metrics.contains_key(metric_name))
        .collect();
    if with.is_empty() {
        return None;
    }
    match source {
        ResultSource::FirstRun => {
            with.sort_by(|a, b| a.first_key().cmp(&b.first_key()));
            Some(with[0].metrics[metric_name])
        }
        ResultSource::MeanAggregated => {
            let vals: Vec<f64> = with.iter().map(|r| r.metrics[metric_name]).collect();
            Some(mean(&vals))
        }
    }
}

/// `(pipeline_id, pipeline_params_id)`.
pub type ConfigKey = (String, String);

/// Per-config value on one dataset, optionally restricted to one split.
pub fn config_values(
    runs: &[RunRecord],
    dataset_id: &str,
    metric_name: &str,
    source: ResultSource,
    scope: Option<&str>,
) -> BTreeMap<ConfigKey, f64> {
    let mut groups: BTreeMap<ConfigKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        if r.dataset_id != dataset_id || r.failed() {
            continue;
        }
        if scope.is_some_and(|s| s != r.dataset_params_id) {
            continue;
        }
        groups
            .entry((r.pipeline_id.clone(), r.pipeline_params_id.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .filter_map(|(k, g)| collapse(&g, metric_name, source).map(|v| (k, v)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankLevel {
    Pipeline,
    ParamConfig,
}

impl std::str::FromStr for RankLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pipeline" | "pipelines" => Ok(RankLevel::Pipeline),
            "param_config" | "params" | "param" => Ok(RankLevel::ParamConfig),
            _ => Err(Error::invalid(format!("unknown ranking level '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub entity_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric_name: String,
    pub level: RankLevel,
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    /// Sorts descending by score, ascending id on ties, and truncates.
    pub fn from_scores(
        metric_name: &str,
        level: RankLevel,
        scores: impl IntoIterator<Item = (String, f64)>,
        top_n: usize,
    ) -> Self {
        let mut entries: Vec<RankEntry> = scores
            .into_iter()
            .map(|(entity_id, score)| RankEntry { entity_id, score })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.entity_id.cmp(&b.entity_id))
        });
        entries.truncate(top_n);
        Self {
            metric_name: metric_name.to_string(),
            level,
            entries,
        }
    }

    /// No runs fell in scope.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.entity_id.as_str()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,entity_id,score\n");
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", i + 1, e.entity_id, e.score);
        }
        out
    }
}

/// Pipeline scores average their configs' values with equal weight.
fn level_scores(values: &BTreeMap<ConfigKey, f64>, level: RankLevel) -> BTreeMap<String, f64> {
    match level {
        RankLevel::ParamConfig => values.iter().map(|((_, c), v)| (c.clone(), *v)).collect(),
        RankLevel::Pipeline => {
            let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for ((p, _), v) in values {
                per.entry(p.clone()).or_default().push(*v);
            }
            per.into_iter().map(|(p, vs)| (p, mean(&vs))).collect()
        }
    }
}

/// Top entities on one dataset.
pub fn rank_entities(
    runs: &[RunRecord],
    dataset_id: &str,
    level: RankLevel,
    metric_name: &str,
    source: ResultSource,
    top_n: usize,
    scope: Option<&str>,
) -> Ranking {
    let values = config_values(runs, dataset_id, metric_name, source, scope);
    Ranking::from_scores(metric_name, level, level_scores(&values, level), top_n)
}

/// Best parameter configurations of one pipeline across every dataset it
/// ran on, scored by the mean of per-dataset values.
pub fn best_params_for_pipeline(
    runs: &[RunRecord],
    pipeline_id: &str,
    metric_name: &str,
    source: ResultSource,
    top_n: usize,
) -> Ranking {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs
        .iter()
        .filter(|r| r.pipeline_id == pipeline_id && !r.failed())
    {
        groups
            .entry((r.pipeline_params_id.clone(), r.dataset_id.clone()))
            .or_default()
            .push(r);
    }
    let mut per_config: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((cfg, _), g) in groups {
        if let Some(v) = collapse(&g, metric_name, source) {
            per_config.entry(cfg).or_default().push(v);
        }
    }
    Ranking::from_scores(
        metric_name,
        RankLevel::ParamConfig,
        per_config.into_iter().map(|(c, vs)| (c, mean(&vs))),
        top_n,
    )
}
