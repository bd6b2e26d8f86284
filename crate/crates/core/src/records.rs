use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metamodel::{Run, RunStatus};

/// Flat view of a run used by the analysis modules. Ids are strings so that
/// synthetic and externally ingested corpora need not use UUIDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub dataset_id: String,
    pub dataset_params_id: String,
    #[serde(default)]
    pub fold_index: Option<usize>,
    pub pipeline_id: String,
    pub pipeline_params_id: String,
    #[serde(default)]
    pub input_trained_pipeline_id: Option<String>,
    pub repeat_index: u32,
    /// Empty for failed runs.
    pub metrics: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn from_run(run: &Run, fold_index: Option<usize>) -> Self {
        let metrics = if run.status == RunStatus::Failed {
            BTreeMap::new()
        } else {
            run.metrics.clone()
        };
        Self {
            run_id: run.header.id.to_string(),
            dataset_id: run.dataset_id.to_string(),
            dataset_params_id: run.dataset_params_id.to_string(),
            fold_index,
            pipeline_id: run.pipeline_id.to_string(),
            pipeline_params_id: run.pipeline_params_id.to_string(),
            input_trained_pipeline_id: run.input_trained_pipeline_id.map(|u| u.to_string()),
            repeat_index: run.repeat_index,
            metrics,
        }
    }

    pub fn failed(&self) -> bool {
        self.metrics.is_empty()
    }

    /// Ordering key that defines which run of a group is "first".
    pub fn first_key(&self) -> (&str, u32, &str) {
        (&self.dataset_params_id, self.repeat_index, &self.run_id)
    }
}
