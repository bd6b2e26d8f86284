use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::params::validate_param_schema;
use super::{DataSchema, MetaFeatures, ParamSpec, ParamValue, ValidationReport};
use crate::store::ObjectRef;
use crate::{Error, Result};

/// The six artifact kinds. Each kind is a separate id namespace for lookups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Dataset,
    DatasetParams,
    Pipeline,
    PipelineParams,
    Run,
    TrainedPipeline,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 6] = [
        ArtifactKind::Dataset,
        ArtifactKind::DatasetParams,
        ArtifactKind::Pipeline,
        ArtifactKind::PipelineParams,
        ArtifactKind::Run,
        ArtifactKind::TrainedPipeline,
    ];

    /// Directory name in the on-disk layout.
    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Dataset => "dataset",
            ArtifactKind::DatasetParams => "dataset_params",
            ArtifactKind::Pipeline => "pipeline",
            ArtifactKind::PipelineParams => "pipeline_params",
            ArtifactKind::Run => "run",
            ArtifactKind::TrainedPipeline => "trained_pipeline",
        }
    }

    /// Kebab-case plural used in REST routes.
    pub fn route_name(self) -> &'static str {
        match self {
            ArtifactKind::Dataset => "datasets",
            ArtifactKind::DatasetParams => "dataset-params",
            ArtifactKind::Pipeline => "pipelines",
            ArtifactKind::PipelineParams => "pipeline-params",
            ArtifactKind::Run => "runs",
            ArtifactKind::TrainedPipeline => "trained-pipelines",
        }
    }

    pub fn from_route_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.route_name() == s)
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.route_name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown artifact kind '{s}'")))
    }
}

fn now() -> DateTime<Utc> {
    // Millisecond precision keeps timestamps stable through JSON.
    Utc::now().trunc_subsecs(3)
}

/// Fields shared by every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonHeader {
    /// Nil until the store assigns an id.
    #[serde(default)]
    pub id: Uuid,
    pub authors: Vec<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default = "now")]
    pub created_at: DateTime<Utc>,
}

impl CommonHeader {
    pub fn new(author: impl Into<String>) -> Self {
        Self {
            id: Uuid::nil(),
            authors: vec![author.into()],
            tags: vec![],
            created_at: now(),
        }
    }

    pub fn with_id(mut self, id: Uuid) -> Self {
        self.id = id;
        self
    }

    pub fn with_tags<S: AsRef<str>>(mut self, tags: &[S]) -> Self {
        self.tags = tags.iter().map(|t| t.as_ref().to_string()).collect();
        self
    }

    pub fn at(mut self, created_at: DateTime<Utc>) -> Self {
        self.created_at = created_at;
        self
    }

    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::new();
        if self.authors.is_empty() {
            r.push("authors", "at least one author is required");
        }
        if self.authors.iter().any(|a| a.trim().is_empty()) {
            r.push("authors", "author names must be non-blank");
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetTarget {
    /// Default intended task, e.g. `classification`.
    pub task: String,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(flatten)]
    pub header: CommonHeader,
    #[serde(default)]
    pub data_schema: DataSchema,
    #[serde(default)]
    pub meta_features: MetaFeatures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<DatasetTarget>,
    /// Origin URI or external identifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    StratifiedKfold,
    Holdout,
    Explicit,
}

/// How a dataset is split for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParameters {
    #[serde(flatten)]
    pub header: CommonHeader,
    pub dataset_id: Uuid,
    pub split_method: SplitMethod,
    pub train_ratio: f64,
    #[serde(default)]
    pub n_folds: usize,
    #[serde(default)]
    pub fold_index: usize,
    #[serde(default)]
    pub seed: u64,
    /// Row count of the split table, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_instances: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_indices: Option<Vec<usize>>,
}

impl DatasetParameters {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::new();
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            r.push("train_ratio", "must lie in (0, 1)");
        }
        if self.split_method == SplitMethod::StratifiedKfold {
            if self.n_folds < 2 {
                r.push("n_folds", "k-fold splitting needs at least 2 folds");
            }
            if self.fold_index >= self.n_folds {
                r.push("fold_index", "must be smaller than n_folds");
            }
        }
        match (&self.train_indices, &self.test_indices) {
            (Some(train), Some(test)) => {
                let train_set: BTreeSet<_> = train.iter().collect();
                if train_set.len() != train.len() {
                    r.push("train_indices", "duplicate index");
                }
                let test_set: BTreeSet<_> = test.iter().collect();
                if test_set.len() != test.len() {
                    r.push("test_indices", "duplicate index");
                }
                if train_set.intersection(&test_set).next().is_some() {
                    r.push("test_indices", "train and test indices overlap");
                }
                if let Some(n) = self.n_instances {
                    if train.iter().chain(test).any(|&i| i >= n) {
                        r.push("train_indices", format!("index out of bounds for {n} rows"));
                    }
                }
            }
            (None, None) => {
                if self.split_method == SplitMethod::Explicit {
                    r.push("train_indices", "explicit split requires index lists");
                }
            }
            _ => r.push(
                "test_indices",
                "train and test indices must be given together",
            ),
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRole {
    Preprocessor,
    Estimator,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineStep {
    pub name: String,
    pub operator: String,
    pub role: StepRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    #[serde(flatten)]
    pub header: CommonHeader,
    pub task_type: String,
    pub pipeline_type: String,
    pub steps: Vec<PipelineStep>,
    #[serde(default)]
    pub input_data_schema: DataSchema,
    #[serde(default)]
    pub parameter_schema: Vec<ParamSpec>,
}

impl Pipeline {
    /// Builds steps from a `pre >> ... >> estimator` description: the last
    /// operator is the estimator, the others are preprocessors.
    pub fn steps_from_chain(chain: &str) -> Vec<PipelineStep> {
        let ops: Vec<&str> = chain
            .split(">>")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let last = ops.len().saturating_sub(1);
        ops.iter()
            .enumerate()
            .map(|(i, op)| PipelineStep {
                name: format!("step{i}"),
                operator: op.to_string(),
                role: if i == last {
                    StepRole::Estimator
                } else {
                    StepRole::Preprocessor
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParameters {
    #[serde(flatten)]
    pub header: CommonHeader,
    pub pipeline_id: Uuid,
    #[serde(default)]
    pub values: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Train,
    Inference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    #[default]
    Completed,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    #[serde(default)]
    pub software: BTreeMap<String, String>,
    #[serde(default)]
    pub hardware: String,
}

/// A single training or inference job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    #[serde(flatten)]
    pub header: CommonHeader,
    pub run_kind: RunKind,
    #[serde(default)]
    pub status: RunStatus,
    pub dataset_id: Uuid,
    pub dataset_params_id: Uuid,
    pub pipeline_id: Uuid,
    pub pipeline_params_id: Uuid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_trained_pipeline_id: Option<Uuid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_trained_pipeline_id: Option<Uuid>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_seconds: Option<f64>,
    #[serde(default)]
    pub repeat_index: u32,
}

impl Run {
    fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::new();
        if self.status == RunStatus::Completed && self.metrics.is_empty() {
            r.push("metrics", "completed runs must report at least one metric");
        }
        for (name, v) in &self.metrics {
            if !v.is_finite() {
                r.push(format!("metrics.{name}"), "metric values must be finite");
            }
        }
        if self.run_kind == RunKind::Inference && self.input_trained_pipeline_id.is_none() {
            r.push(
                "input_trained_pipeline_id",
                "inference runs need a trained pipeline",
            );
        }
        if let Some(t) = self.timing_seconds {
            if t < 0.0 || !t.is_finite() {
                r.push("timing_seconds", "must be a non-negative number");
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    #[serde(flatten)]
    pub header: CommonHeader,
    pub origin_run_id: Uuid,
    #[serde(default)]
    pub asset_refs: Vec<ObjectRef>,
}

/// An outbound reference from one document to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub field: &'static str,
    pub id: Uuid,
    pub kind: ArtifactKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Artifact {
    Dataset(Dataset),
    DatasetParams(DatasetParameters),
    Pipeline(Pipeline),
    PipelineParams(PipelineParameters),
    Run(Run),
    TrainedPipeline(TrainedPipeline),
}

impl Artifact {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            Artifact::Dataset(_) => ArtifactKind::Dataset,
            Artifact::DatasetParams(_) => ArtifactKind::DatasetParams,
            Artifact::Pipeline(_) => ArtifactKind::Pipeline,
            Artifact::PipelineParams(_) => ArtifactKind::PipelineParams,
            Artifact::Run(_) => ArtifactKind::Run,
            Artifact::TrainedPipeline(_) => ArtifactKind::TrainedPipeline,
        }
    }

    pub fn header(&self) -> &CommonHeader {
        match self {
            Artifact::Dataset(d) => &d.header,
            Artifact::DatasetParams(d) => &d.header,
            Artifact::Pipeline(d) => &d.header,
            Artifact::PipelineParams(d) => &d.header,
            Artifact::Run(d) => &d.header,
            Artifact::TrainedPipeline(d) => &d.header,
        }
    }

    pub fn header_mut(&mut self) -> &mut CommonHeader {
        match self {
            Artifact::Dataset(d) => &mut d.header,
            Artifact::DatasetParams(d) => &mut d.header,
            Artifact::Pipeline(d) => &mut d.header,
            Artifact::PipelineParams(d) => &mut d.header,
            Artifact::Run(d) => &mut d.header,
            Artifact::TrainedPipeline(d) => &mut d.header,
        }
    }

    pub fn id(&self) -> Uuid {
        self.header().id
    }

    /// Parses a document of a known kind from JSON.
    pub fn from_json(kind: ArtifactKind, value: serde_json::Value) -> Result<Self> {
        Ok(match kind {
            ArtifactKind::Dataset => Artifact::Dataset(serde_json::from_value(value)?),
            ArtifactKind::DatasetParams => Artifact::DatasetParams(serde_json::from_value(value)?),
            ArtifactKind::Pipeline => Artifact::Pipeline(serde_json::from_value(value)?),
            ArtifactKind::PipelineParams => {
                Artifact::PipelineParams(serde_json::from_value(value)?)
            }
            ArtifactKind::Run => Artifact::Run(serde_json::from_value(value)?),
            ArtifactKind::TrainedPipeline => {
                Artifact::TrainedPipeline(serde_json::from_value(value)?)
            }
        })
    }

    pub fn from_json_str(kind: ArtifactKind, text: &str) -> Result<Self> {
        Self::from_json(kind, serde_json::from_str(text)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    /// Named link field values, for query filters. Optional links that are
    /// unset are omitted.
    pub fn link_value(&self, field: &str) -> Option<Uuid> {
        self.links()
            .into_iter()
            .find(|l| l.field == field)
            .map(|l| l.id)
    }

    pub fn links(&self) -> Vec<Link> {
        let link = |field, id, kind| Link { field, id, kind };
        match self {
            Artifact::Dataset(_) | Artifact::Pipeline(_) => vec![],
            Artifact::DatasetParams(d) => {
                vec![link("dataset_id", d.dataset_id, ArtifactKind::Dataset)]
            }
            Artifact::PipelineParams(p) => {
                vec![link("pipeline_id", p.pipeline_id, ArtifactKind::Pipeline)]
            }
            Artifact::Run(r) => {
                let mut v = vec![
                    link("dataset_id", r.dataset_id, ArtifactKind::Dataset),
                    link(
                        "dataset_params_id",
                        r.dataset_params_id,
                        ArtifactKind::DatasetParams,
                    ),
                    link("pipeline_id", r.pipeline_id, ArtifactKind::Pipeline),
                    link(
                        "pipeline_params_id",
                        r.pipeline_params_id,
                        ArtifactKind::PipelineParams,
                    ),
                ];
                if let Some(id) = r.input_trained_pipeline_id {
                    v.push(link(
                        "input_trained_pipeline_id",
                        id,
                        ArtifactKind::TrainedPipeline,
                    ));
                }
                if let Some(id) = r.output_trained_pipeline_id {
                    v.push(link(
                        "output_trained_pipeline_id",
                        id,
                        ArtifactKind::TrainedPipeline,
                    ));
                }
                v
            }
            Artifact::TrainedPipeline(t) => {
                vec![link("origin_run_id", t.origin_run_id, ArtifactKind::Run)]
            }
        }
    }

    /// Checks that need nothing beyond the document itself.
    pub fn validate(&self) -> ValidationReport {
        let mut r = self.header().validate();
        match self {
            Artifact::Dataset(d) => {
                r.merge(d.data_schema.validate().prefixed("data_schema"));
                r.merge(d.meta_features.validate().prefixed("meta_features"));
                if let Some(t) = &d.target {
                    for f in &t.features {
                        if d.data_schema.entry(f).is_none() {
                            r.push("target.features", format!("'{f}' not in data_schema"));
                        }
                    }
                }
            }
            Artifact::DatasetParams(p) => r.merge(p.validate()),
            Artifact::Pipeline(p) => {
                if p.steps.is_empty() {
                    r.push("steps", "a pipeline needs at least one step");
                }
                r.merge(validate_param_schema(&p.parameter_schema));
                r.merge(p.input_data_schema.validate().prefixed("input_data_schema"));
            }
            Artifact::PipelineParams(_) => {}
            Artifact::Run(run) => r.merge(run.validate()),
            Artifact::TrainedPipeline(t) => {
                for (i, a) in t.asset_refs.iter().enumerate() {
                    if !crate::store::is_valid_hash(&a.hash) {
                        r.push(
                            format!("asset_refs[{i}].hash"),
                            "expected 64 lowercase hex digits",
                        );
                    }
                }
            }
        }
        r
    }
}

impl From<Dataset> for Artifact {
    fn from(d: Dataset) -> Self {
        Artifact::Dataset(d)
    }
}
impl From<DatasetParameters> for Artifact {
    fn from(d: DatasetParameters) -> Self {
        Artifact::DatasetParams(d)
    }
}
impl From<Pipeline> for Artifact {
    fn from(d: Pipeline) -> Self {
        Artifact::Pipeline(d)
    }
}
impl From<PipelineParameters> for Artifact {
    fn from(d: PipelineParameters) -> Self {
        Artifact::PipelineParams(d)
    }
}
impl From<Run> for Artifact {
    fn from(d: Run) -> Self {
        Artifact::Run(d)
    }
}
impl From<TrainedPipeline> for Artifact {
    fn from(d: TrainedPipeline) -> Self {
        Artifact::TrainedPipeline(d)
    }
}
