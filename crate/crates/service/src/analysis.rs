//! Analysis entry points shared by the REST handlers and the CLI.

use std::collections::BTreeMap;

use lde_core::metalearn::{
    self, compare_sources, nearest_datasets, Recommendation, Recommender, ResultsMatrix,
    SourceComparison, DEFAULT_HORIZON,
};
use lde_core::metamodel::{extract_meta_features, Artifact, ArtifactKind, MetaFeatures, Table};
use lde_core::metrics::{self, RankLevel, Ranking, ResultSource};
use lde_core::stats::{variability_report, ExternalResults, VariabilityMode, VariabilityReport};
use lde_core::{Error, ExperimentKey, Result, Run, Store, ValidationReport};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::ingest::resolve;

pub const DEFAULT_METRIC: &str = "normalized_accuracy";
pub const DEFAULT_TOP_NS: [usize; 3] = [5, 10, 20];

fn require(store: &Store, kind: ArtifactKind, reference: &str) -> Result<Uuid> {
    let id = resolve(store, kind, reference);
    if store.contains(kind, id) {
        Ok(id)
    } else {
        Err(Error::NotFound(format!("{kind} '{reference}'")))
    }
}

pub fn top_entities(
    store: &Store,
    dataset: &str,
    level: RankLevel,
    metric: &str,
    source: ResultSource,
    n: usize,
) -> Result<Ranking> {
    let id = require(store, ArtifactKind::Dataset, dataset)?;
    let runs = store.run_records();
    Ok(metrics::rank_entities(
        &runs,
        &id.to_string(),
        level,
        metric,
        source,
        n,
        None,
    ))
}

pub fn best_params(
    store: &Store,
    pipeline: &str,
    metric: &str,
    source: ResultSource,
    n: usize,
) -> Result<Ranking> {
    let id = require(store, ArtifactKind::Pipeline, pipeline)?;
    let runs = store.run_records();
    Ok(metrics::best_params_for_pipeline(
        &runs,
        &id.to_string(),
        metric,
        source,
        n,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarDataset {
    pub dataset_id: String,
    pub distance: f64,
}

/// Nearest stored datasets by meta-feature distance, excluding the query.
pub fn similar_datasets(store: &Store, dataset: &str, k: usize) -> Result<Vec<SimilarDataset>> {
    let id = require(store, ArtifactKind::Dataset, dataset)?;
    let mut meta = store.meta_features();
    let query = meta
        .remove(&id.to_string())
        .ok_or_else(|| Error::NotFound(format!("dataset '{dataset}'")))?;
    let corpus = ResultsMatrix {
        cells: vec![Vec::new(); meta.len()],
        datasets: meta.keys().cloned().collect(),
        meta: meta.into_values().collect(),
        configs: Vec::new(),
        floor: 0.0,
    };
    Ok(nearest_datasets(&query, &corpus, k)?
        .into_iter()
        .map(|(dataset_id, distance)| SimilarDataset {
            dataset_id,
            distance,
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunQuery {
    pub dataset: Option<String>,
    pub dataset_params: Option<String>,
    pub pipeline: Option<String>,
    pub pipeline_params: Option<String>,
}

pub fn experiment_runs(store: &Store, q: &RunQuery) -> Result<Vec<Run>> {
    let field = |kind, r: &Option<String>| r.as_deref().map(|r| resolve(store, kind, r));
    let key = ExperimentKey {
        dataset_id: field(ArtifactKind::Dataset, &q.dataset),
        dataset_params_id: field(ArtifactKind::DatasetParams, &q.dataset_params),
        pipeline_id: field(ArtifactKind::Pipeline, &q.pipeline),
        pipeline_params_id: field(ArtifactKind::PipelineParams, &q.pipeline_params),
        input_trained_pipeline_id: None,
    };
    Ok(store.runs_for_experiment(&key))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecommendRequest {
    pub meta_features: Option<MetaFeatures>,
    /// Headed CSV text of the new dataset; meta-features are extracted from it.
    pub table_csv: Option<String>,
    pub target: Option<String>,
    pub k: Option<usize>,
    pub budget: Option<usize>,
    pub metric: Option<String>,
    pub source: Option<ResultSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub neighbours: Vec<String>,
    pub recommendations: Vec<Recommendation>,
}

fn invalid_request(path: &str, message: impl Into<String>) -> Error {
    let mut r = ValidationReport::new();
    r.push(path, message);
    Error::Validation(r)
}

impl RecommendRequest {
    pub fn query_features(&self) -> Result<MetaFeatures> {
        let mf = match (&self.meta_features, &self.table_csv) {
            (Some(mf), None) => mf.clone(),
            (None, Some(text)) => {
                let table = Table::from_csv_reader("query", text.as_bytes(), self.target.clone())
                    .map_err(|e| invalid_request("table_csv", e.to_string()))?;
                extract_meta_features(&table)
                    .map_err(|e| invalid_request("table_csv", e.to_string()))?
            }
            (Some(_), Some(_)) => {
                return Err(invalid_request(
                    "",
                    "give meta_features or table_csv, not both",
                ))
            }
            (None, None) => return Err(invalid_request("meta_features", "required")),
        };
        mf.validate()
            .prefixed("meta_features")
            .into_result()
            .map(|()| mf)
    }
}

/// First `budget` kND proposals against the stored corpus.
pub fn recommend(store: &Store, req: &RecommendRequest) -> Result<RecommendResponse> {
    let query = req.query_features()?;
    let k = req.k.unwrap_or(5);
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let metric = req.metric.as_deref().unwrap_or(DEFAULT_METRIC);
    let source = req.source.unwrap_or(ResultSource::MeanAggregated);
    let corpus =
        ResultsMatrix::from_records(&store.run_records(), metric, source, &store.meta_features())?;
    if corpus.n_rows() == 0 {
        return Err(Error::InvalidState(format!(
            "no stored results for metric '{metric}' to recommend from"
        )));
    }
    let (recommendations, neighbours) =
        metalearn::recommend(&query, &corpus, k, req.budget.unwrap_or(10))?;
    Ok(RecommendResponse {
        neighbours,
        recommendations,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariabilityRequest {
    pub metric: Option<String>,
    pub alpha: Option<f64>,
    pub top_ns: Option<Vec<usize>>,
    /// `dataset_configs` (default), `repeated_trials` or `cross_corpus`.
    pub mode: Option<String>,
    /// Needed by `cross_corpus`: dataset -> pipeline_params id -> score.
    pub external: Option<ExternalResults>,
    /// Datasets to include; all stored datasets when absent.
    pub datasets: Option<Vec<String>>,
}

pub fn variability(store: &Store, req: &VariabilityRequest) -> Result<VariabilityReport> {
    let mode = match req.mode.as_deref().unwrap_or("dataset_configs") {
        "dataset_configs" => VariabilityMode::DatasetConfigs,
        "repeated_trials" => VariabilityMode::RepeatedTrials,
        "cross_corpus" => {
            let ext = req.external.as_ref().ok_or_else(|| {
                Error::InvalidInput("cross_corpus mode needs external results".into())
            })?;
            let scores = ext
                .scores
                .iter()
                .map(|(d, v)| {
                    (
                        resolve(store, ArtifactKind::Dataset, d).to_string(),
                        v.clone(),
                    )
                })
                .collect();
            VariabilityMode::CrossCorpus(ExternalResults { scores })
        }
        other => return Err(Error::InvalidInput(format!("unknown mode '{other}'"))),
    };
    let datasets: Vec<String> = match &req.datasets {
        Some(refs) => refs
            .iter()
            .map(|r| require(store, ArtifactKind::Dataset, r).map(|id| id.to_string()))
            .collect::<Result<_>>()?,
        None => store
            .datasets()
            .iter()
            .map(|d| d.header.id.to_string())
            .collect(),
    };
    let top_ns = req
        .top_ns
        .clone()
        .unwrap_or_else(|| DEFAULT_TOP_NS.to_vec());
    variability_report(
        &store.run_records(),
        &datasets,
        req.metric.as_deref().unwrap_or(DEFAULT_METRIC),
        req.alpha.unwrap_or(0.05),
        &top_ns,
        &mode,
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegretRequest {
    pub metric: Option<String>,
    /// `greedy`, `knd` or `knd:<k>`.
    pub recommender: Option<String>,
    pub horizon: Option<usize>,
    pub floor: Option<f64>,
}

pub fn regret(store: &Store, req: &RegretRequest) -> Result<SourceComparison> {
    let recommender: Recommender = req.recommender.as_deref().unwrap_or("knd").parse()?;
    let horizon = req.horizon.unwrap_or(DEFAULT_HORIZON);
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    compare_sources(
        &store.run_records(),
        &store.meta_features(),
        req.metric.as_deref().unwrap_or(DEFAULT_METRIC),
        recommender,
        horizon,
        req.floor.unwrap_or(0.0),
    )
}

/// Ids of all stored artifacts of one kind, mapped to their documents.
pub fn snapshot(store: &Store, kind: ArtifactKind) -> BTreeMap<Uuid, Artifact> {
    store
        .query_artifacts(kind, &lde_core::QueryFilter::all())
        .into_iter()
        .map(|a| (a.id(), a))
        .collect()
}
