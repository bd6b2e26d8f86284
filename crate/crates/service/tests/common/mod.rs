#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use lde_core::metamodel::{
    CommonHeader, Dataset, DatasetParameters, MetaFeatures, Pipeline, PipelineParameters, Run,
    RunKind, RunStatus, SplitMethod,
};
use lde_core::Store;
use uuid::Uuid;

/// Starts a server on an ephemeral port and returns its base URL.
pub async fn spawn(store: Arc<Store>) -> String {
    let (listener, addr) = lde_service::bind("127.0.0.1:0").await.unwrap();
    tokio::spawn(async move {
        axum::serve(listener, lde_service::router(store))
            .await
            .unwrap();
    });
    format!("http://{addr}")
}

pub fn results_csv(rows: &[(&str, &str, &str, usize, u32, &str, f64)]) -> String {
    let mut s = String::from(
        "dataset_id,pipeline_id,pipeline_params_id,fold_index,repeat_index,metric_name,value\n",
    );
    for (d, p, c, f, r, m, v) in rows {
        s.push_str(&format!("{d},{p},{c},{f},{r},{m},{v}\n"));
    }
    s
}

pub struct Seeded {
    pub datasets: Vec<Uuid>,
    pub configs: Vec<(Uuid, Uuid)>,
}

/// `values[d][c]` becomes one run per dataset and config; dataset `d` gets
/// `n_instances = 100 * (d + 1)` and `n_classes = 2 + d % 3`.
pub fn seed_store(store: &Store, values: &[Vec<f64>]) -> Seeded {
    let n_configs = values[0].len();
    let p = store
        .put_artifact(Pipeline {
            header: CommonHeader::new("t"),
            task_type: "classification".into(),
            pipeline_type: "test".into(),
            steps: Pipeline::steps_from_chain("scale >> tree"),
            input_data_schema: Default::default(),
            parameter_schema: vec![],
        })
        .unwrap();
    let configs: Vec<(Uuid, Uuid)> = (0..n_configs)
        .map(|_| {
            let pp = store
                .put_artifact(PipelineParameters {
                    header: CommonHeader::new("t"),
                    pipeline_id: p,
                    values: BTreeMap::new(),
                })
                .unwrap();
            (p, pp)
        })
        .collect();
    let mut datasets = Vec::new();
    for (d, row) in values.iter().enumerate() {
        let ds = store
            .put_artifact(Dataset {
                header: CommonHeader::new("t"),
                data_schema: Default::default(),
                meta_features: MetaFeatures {
                    n_instances: Some(100 * (d as u64 + 1)),
                    n_classes: Some(2 + d as u64 % 3),
                    ..Default::default()
                },
                target: None,
                source: None,
            })
            .unwrap();
        let dp = store
            .put_artifact(DatasetParameters {
                header: CommonHeader::new("t"),
                dataset_id: ds,
                split_method: SplitMethod::Holdout,
                train_ratio: 0.8,
                n_folds: 0,
                fold_index: 0,
                seed: 0,
                n_instances: None,
                train_indices: None,
                test_indices: None,
            })
            .unwrap();
        for (c, v) in row.iter().enumerate() {
            store
                .put_artifact(Run {
                    header: CommonHeader::new("t"),
                    run_kind: RunKind::Train,
                    status: RunStatus::Completed,
                    dataset_id: ds,
                    dataset_params_id: dp,
                    pipeline_id: configs[c].0,
                    pipeline_params_id: configs[c].1,
                    input_trained_pipeline_id: None,
                    output_trained_pipeline_id: None,
                    metrics: BTreeMap::from([("normalized_accuracy".to_string(), *v)]),
                    environment: Default::default(),
                    timing_seconds: None,
                    repeat_index: 0,
                })
                .unwrap();
        }
        datasets.push(ds);
    }
    Seeded { datasets, configs }
}
