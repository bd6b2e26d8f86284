#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{TimeZone, Utc};
use lde_core::metamodel::{
    Cell, Column, ColumnKind, CommonHeader, Dataset, DatasetParameters, ParamSpec, ParamValue,
    Pipeline, PipelineParameters, Run, RunKind, RunStatus, SplitMethod, Table,
};
use rand::Rng;
use uuid::Uuid;

pub fn header(author: &str, tags: &[&str], ms: i64) -> CommonHeader {
    CommonHeader::new(author)
        .with_tags(tags)
        .at(Utc.timestamp_millis_opt(ms).unwrap())
}

pub fn dataset(h: CommonHeader) -> Dataset {
    Dataset {
        header: h,
        data_schema: Default::default(),
        meta_features: Default::default(),
        target: None,
        source: None,
    }
}

pub fn holdout(h: CommonHeader, dataset_id: Uuid, seed: u64) -> DatasetParameters {
    DatasetParameters {
        header: h,
        dataset_id,
        split_method: SplitMethod::Holdout,
        train_ratio: 0.8,
        n_folds: 0,
        fold_index: 0,
        seed,
        n_instances: None,
        train_indices: None,
        test_indices: None,
    }
}

pub fn pipeline(h: CommonHeader, chain: &str) -> Pipeline {
    Pipeline {
        header: h,
        task_type: "classification".into(),
        pipeline_type: "sklearn".into(),
        steps: Pipeline::steps_from_chain(chain),
        input_data_schema: Default::default(),
        parameter_schema: vec![ParamSpec::float("alpha", 0.0, 10.0)],
    }
}

pub fn params(h: CommonHeader, pipeline_id: Uuid, alpha: f64) -> PipelineParameters {
    PipelineParameters {
        header: h,
        pipeline_id,
        values: BTreeMap::from([("alpha".to_string(), ParamValue::Float(alpha))]),
    }
}

pub fn run(
    h: CommonHeader,
    dataset_id: Uuid,
    dataset_params_id: Uuid,
    pipeline_id: Uuid,
    pipeline_params_id: Uuid,
    acc: f64,
) -> Run {
    Run {
        header: h,
        run_kind: RunKind::Train,
        status: RunStatus::Completed,
        dataset_id,
        dataset_params_id,
        pipeline_id,
        pipeline_params_id,
        input_trained_pipeline_id: None,
        output_trained_pipeline_id: None,
        metrics: BTreeMap::from([("normalized_accuracy".to_string(), acc)]),
        environment: Default::default(),
        timing_seconds: None,
        repeat_index: 0,
    }
}

/// Table with a categorical target of `n_classes` labels, one numeric and
/// one categorical feature, and roughly 5% missing feature cells.
pub fn random_table<R: Rng>(rng: &mut R, n_rows: usize, n_classes: usize) -> Table {
    let target: Vec<String> = (0..n_rows)
        .map(|_| format!("c{}", rng.random_range(0..n_classes)))
        .collect();
    let num: Vec<Cell> = (0..n_rows)
        .map(|_| {
            if rng.random_bool(0.05) {
                Cell::Missing
            } else {
                Cell::Number(rng.random_range(-50.0..50.0))
            }
        })
        .collect();
    let cat: Vec<Cell> = (0..n_rows)
        .map(|_| {
            if rng.random_bool(0.05) {
                Cell::Missing
            } else {
                Cell::Text(["red", "green", "blue"][rng.random_range(0..3)].to_string())
            }
        })
        .collect();
    Table::new(
        "random",
        vec![
            Column::new("x", ColumnKind::Numeric, num),
            Column::new("colour", ColumnKind::Categorical, cat),
            Column::categorical("label", &target),
        ],
        Some("label".into()),
    )
    .unwrap()
}
