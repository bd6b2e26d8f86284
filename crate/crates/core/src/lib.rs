//! Lifelong experiment metadata store.
//!
//! Records linked experiment artifacts (datasets, split configurations,
//! pipelines, hyperparameters, runs and trained pipelines) and builds
//! rankings, nonparametric variability statistics and meta-learning
//! recommenders on top of the stored runs.

pub mod error;
pub mod metalearn;
pub mod metamodel;
pub mod metrics;
pub mod records;
pub mod splitter;
pub mod stats;
pub mod store;
pub mod synthetic;

pub use error::{Error, Result};
pub use metamodel::{
    Artifact, ArtifactKind, CommonHeader, DataSchema, Dataset, DatasetParameters, MetaFeatures,
    Pipeline, PipelineParameters, Run, Table, TrainedPipeline, ValidationReport,
};
pub use records::RunRecord;
pub use store::{ExperimentKey, ObjectRef, QueryFilter, Store};
