//! Import of external results corpora from long-format CSV files.
//!
//! Artifacts get UUIDv5 ids derived from natural keys, so re-ingesting a file
//! finds the documents it created the first time.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use lde_core::metamodel::{
    Artifact, ArtifactKind, CommonHeader, Dataset, DatasetParameters, Pipeline, PipelineParameters,
    Run, RunKind, RunStatus, SplitMethod,
};
use lde_core::{Error, Result, Store};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub const RESULT_COLUMNS: [&str; 7] = [
    "dataset_id",
    "pipeline_id",
    "pipeline_params_id",
    "fold_index",
    "repeat_index",
    "metric_name",
    "value",
];

pub const META_COLUMNS: [&str; 3] = ["dataset_id", "feature", "value"];

const NAMESPACE: Uuid = Uuid::from_u128(0x6c64_6500_8f1e_4a57_9a3c_2b51_0e7d_c4a9);
const AUTHOR: &str = "ingest";

pub fn natural_uuid(key: &str) -> Uuid {
    Uuid::new_v5(&NAMESPACE, key.as_bytes())
}

pub fn dataset_uuid(dataset: &str) -> Uuid {
    natural_uuid(&format!("dataset:{dataset}"))
}

pub fn dataset_params_uuid(dataset: &str, fold: usize) -> Uuid {
    natural_uuid(&format!("dataset_params:{dataset}:{fold}"))
}

pub fn pipeline_uuid(pipeline: &str) -> Uuid {
    natural_uuid(&format!("pipeline:{pipeline}"))
}

pub fn pipeline_params_uuid(pipeline: &str, params: &str) -> Uuid {
    natural_uuid(&format!("pipeline_params:{pipeline}:{params}"))
}

pub fn run_uuid(dataset: &str, pipeline: &str, params: &str, fold: usize, repeat: u32) -> Uuid {
    natural_uuid(&format!(
        "run:{dataset}:{pipeline}:{params}:{fold}:{repeat}"
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRow {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub created: BTreeMap<ArtifactKind, usize>,
    /// Artifacts the file referred to that were already stored unchanged.
    pub existing: usize,
    /// Existing artifacts that gained metrics or meta-features.
    pub updated: usize,
    pub rows_total: usize,
    pub rows_accepted: usize,
    pub skipped: Vec<SkippedRow>,
}

impl IngestReport {
    pub fn created_total(&self) -> usize {
        self.created.values().sum()
    }

    pub fn created(&self, kind: ArtifactKind) -> usize {
        self.created.get(&kind).copied().unwrap_or(0)
    }

    fn skip(&mut self, line: u64, reason: impl Into<String>) {
        self.skipped.push(SkippedRow {
            line,
            reason: reason.into(),
        });
    }

    fn bump(&mut self, kind: ArtifactKind) {
        *self.created.entry(kind).or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RunKey {
    dataset: String,
    pipeline: String,
    params: String,
    fold: usize,
    repeat: u32,
}

fn header(natural: &str, id: Uuid) -> CommonHeader {
    CommonHeader::new(AUTHOR)
        .with_id(id)
        .with_tags(&["ingested".to_string(), format!("key:{natural}")])
}

fn column_positions(headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h.trim() == *w)
                .ok_or_else(|| Error::InvalidInput(format!("missing column '{w}'")))
        })
        .collect()
}

fn parse_row(
    rec: &csv::StringRecord,
    pos: &[usize],
    metric_map: &BTreeMap<String, String>,
) -> std::result::Result<(RunKey, String, f64), String> {
    let field = |i: usize| rec.get(pos[i]).map(str::trim).unwrap_or("");
    for (i, name) in RESULT_COLUMNS.iter().enumerate() {
        if field(i).is_empty() {
            return Err(format!("empty {name}"));
        }
    }
    let fold: usize = field(3)
        .parse()
        .map_err(|_| format!("bad fold_index '{}'", field(3)))?;
    let repeat: u32 = field(4)
        .parse()
        .map_err(|_| format!("bad repeat_index '{}'", field(4)))?;
    let value: f64 = field(6)
        .parse()
        .map_err(|_| format!("bad value '{}'", field(6)))?;
    if !value.is_finite() {
        return Err("non-finite value".into());
    }
    let raw_metric = field(5);
    let metric = metric_map
        .get(raw_metric)
        .cloned()
        .unwrap_or_else(|| raw_metric.to_string());
    // Normalized scores live in [-1, 1]; anything outside is a unit mix-up.
    if metric.starts_with("normalized_") && !(-1.0..=1.0).contains(&value) {
        return Err(format!("{metric} = {value} outside [-1, 1]"));
    }
    Ok((
        RunKey {
            dataset: field(0).to_string(),
            pipeline: field(1).to_string(),
            params: field(2).to_string(),
            fold,
            repeat,
        },
        metric,
        value,
    ))
}

/// Ingests a results file. `metric_map` renames metrics on the way in.
pub fn ingest_results<R: Read>(
    store: &Store,
    reader: R,
    metric_map: &BTreeMap<String, String>,
) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let pos = column_positions(rdr.headers()?, &RESULT_COLUMNS)?;
    let mut report = IngestReport::default();

    let mut runs: BTreeMap<RunKey, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        report.rows_total += 1;
        let line = i as u64 + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.skip(line, format!("unparseable row: {e}"));
                continue;
            }
        };
        match parse_row(&rec, &pos, metric_map) {
            Ok((key, metric, value)) => {
                let metrics = runs.entry(key).or_default();
                match metrics.get(&metric) {
                    Some(v) if *v != value => {
                        report.skip(line, format!("conflicting duplicate of {metric}"))
                    }
                    _ => {
                        metrics.insert(metric, value);
                        report.rows_accepted += 1;
                    }
                }
            }
            Err(reason) => report.skip(line, reason),
        }
    }

    let mut n_folds: BTreeMap<&str, usize> = BTreeMap::new();
    for k in runs.keys() {
        let n = n_folds.entry(k.dataset.as_str()).or_insert(2);
        *n = (*n).max(k.fold + 1);
    }

    let mut seen: BTreeSet<Uuid> = BTreeSet::new();
    for (key, metrics) in &runs {
        let d_id = dataset_uuid(&key.dataset);
        if seen.insert(d_id) {
            ensure(store, &mut report, stub_dataset(&key.dataset))?;
        }
        let dp_id = dataset_params_uuid(&key.dataset, key.fold);
        if seen.insert(dp_id) {
            let k = n_folds[key.dataset.as_str()];
            let dp = DatasetParameters {
                header: header(&format!("{}:{}", key.dataset, key.fold), dp_id),
                dataset_id: d_id,
                split_method: SplitMethod::StratifiedKfold,
                train_ratio: (k - 1) as f64 / k as f64,
                n_folds: k,
                fold_index: key.fold,
                seed: 0,
                n_instances: None,
                train_indices: None,
                test_indices: None,
            };
            ensure(store, &mut report, dp.into())?;
        }
        let p_id = pipeline_uuid(&key.pipeline);
        if seen.insert(p_id) {
            let p = Pipeline {
                header: header(&key.pipeline, p_id),
                task_type: "classification".into(),
                pipeline_type: "external".into(),
                steps: Pipeline::steps_from_chain(&key.pipeline),
                input_data_schema: Default::default(),
                parameter_schema: vec![],
            };
            ensure(store, &mut report, p.into())?;
        }
        let pp_id = pipeline_params_uuid(&key.pipeline, &key.params);
        if seen.insert(pp_id) {
            let pp = PipelineParameters {
                header: header(&format!("{}:{}", key.pipeline, key.params), pp_id),
                pipeline_id: p_id,
                values: BTreeMap::new(),
            };
            ensure(store, &mut report, pp.into())?;
        }

        let run_id = run_uuid(
            &key.dataset,
            &key.pipeline,
            &key.params,
            key.fold,
            key.repeat,
        );
        match store.get_artifact(ArtifactKind::Run, run_id) {
            Ok(Artifact::Run(mut run)) => {
                let before = run.metrics.len();
                for (m, v) in metrics {
                    run.metrics.entry(m.clone()).or_insert(*v);
                }
                if run.metrics.len() > before {
                    store.update_artifact(run)?;
                    report.updated += 1;
                } else {
                    report.existing += 1;
                }
            }
            Ok(_) => unreachable!("store returned a document of another kind"),
            Err(Error::NotFound(_)) => {
                let natural = format!(
                    "{}:{}:{}:{}:{}",
                    key.dataset, key.pipeline, key.params, key.fold, key.repeat
                );
                let run = Run {
                    header: header(&natural, run_id),
                    run_kind: RunKind::Train,
                    status: RunStatus::Completed,
                    dataset_id: d_id,
                    dataset_params_id: dp_id,
                    pipeline_id: p_id,
                    pipeline_params_id: pp_id,
                    input_trained_pipeline_id: None,
                    output_trained_pipeline_id: None,
                    metrics: metrics.clone(),
                    environment: Default::default(),
                    timing_seconds: None,
                    repeat_index: key.repeat,
                };
                store.put_artifact(run)?;
                report.bump(ArtifactKind::Run);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn stub_dataset(natural: &str) -> Artifact {
    Dataset {
        header: header(natural, dataset_uuid(natural)),
        data_schema: Default::default(),
        meta_features: Default::default(),
        target: None,
        source: Some(natural.to_string()),
    }
    .into()
}

fn ensure(store: &Store, report: &mut IngestReport, doc: Artifact) -> Result<()> {
    if store.contains(doc.kind(), doc.id()) {
        report.existing += 1;
        return Ok(());
    }
    let kind = doc.kind();
    store.put_artifact(doc)?;
    report.bump(kind);
    Ok(())
}

/// Ingests a meta-features sidecar (`dataset_id,feature,value`). Datasets
/// not yet in the store are created as stubs.
pub fn ingest_meta_features<R: Read>(store: &Store, reader: R) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let pos = column_positions(rdr.headers()?, &META_COLUMNS)?;
    let mut report = IngestReport::default();
    let mut per_dataset: BTreeMap<String, Vec<(u64, String, f64)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        report.rows_total += 1;
        let line = i as u64 + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                report.skip(line, format!("unparseable row: {e}"));
                continue;
            }
        };
        let field = |j: usize| rec.get(pos[j]).map(str::trim).unwrap_or("");
        let (d, f, v) = (field(0), field(1), field(2));
        if d.is_empty() || f.is_empty() {
            report.skip(line, "empty dataset_id or feature");
            continue;
        }
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => {
                per_dataset
                    .entry(d.to_string())
                    .or_default()
                    .push((line, f.to_string(), x))
            }
            _ => report.skip(line, format!("bad value '{v}'")),
        }
    }

    for (natural, rows) in per_dataset {
        let id = dataset_uuid(&natural);
        let (mut ds, is_new) = match store.get_artifact(ArtifactKind::Dataset, id) {
            Ok(Artifact::Dataset(d)) => (d, false),
            Ok(_) => unreachable!("store returned a document of another kind"),
            Err(Error::NotFound(_)) => match stub_dataset(&natural) {
                Artifact::Dataset(d) => (d, true),
                _ => unreachable!(),
            },
            Err(e) => return Err(e),
        };
        let before = ds.meta_features.clone();
        for (line, f, v) in rows {
            let mut mf = ds.meta_features.clone();
            match mf.set(&f, v) {
                Ok(()) if mf.validate().ok => {
                    ds.meta_features = mf;
                    report.rows_accepted += 1;
                }
                Ok(()) => report.skip(line, format!("{f} = {v} fails validation")),
                Err(e) => report.skip(line, e.to_string()),
            }
        }
        if is_new {
            store.put_artifact(ds)?;
            report.bump(ArtifactKind::Dataset);
        } else if ds.meta_features != before {
            store.update_artifact(ds)?;
            report.updated += 1;
        } else {
            report.existing += 1;
        }
    }
    Ok(report)
}

/// Resolves a dataset reference given either as a UUID or as the natural key
/// used at ingest time.
pub fn resolve(store: &Store, kind: ArtifactKind, reference: &str) -> Uuid {
    if let Ok(id) = Uuid::parse_str(reference) {
        if store.contains(kind, id) {
            return id;
        }
    }
    match kind {
        ArtifactKind::Dataset => dataset_uuid(reference),
        ArtifactKind::Pipeline => pipeline_uuid(reference),
        _ => Uuid::parse_str(reference).unwrap_or_else(|_| natural_uuid(reference)),
    }
}

/// Natural keys of ingested artifacts, keyed by id string.
pub fn natural_keys(store: &Store, kind: ArtifactKind) -> HashMap<String, String> {
    store
        .query_artifacts(kind, &lde_core::QueryFilter::all().tag("ingested"))
        .into_iter()
        .filter_map(|a| {
            let key = a
                .header()
                .tags
                .iter()
                .find_map(|t| t.strip_prefix("key:").map(str::to_string))?;
            Some((a.id().to_string(), key))
        })
        .collect()
}

/// Writes run records in the results CSV layout, one row per metric.
pub fn write_results_csv<W: std::io::Write>(runs: &[lde_core::RunRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RESULT_COLUMNS)?;
    for r in runs {
        let fold = r.fold_index.unwrap_or(0).to_string();
        let repeat = r.repeat_index.to_string();
        for (m, v) in &r.metrics {
            wtr.write_record([
                r.dataset_id.as_str(),
                &r.pipeline_id,
                &r.pipeline_params_id,
                &fold,
                &repeat,
                m,
                &v.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes meta-features in the sidecar layout. Unset features are omitted.
pub fn write_meta_csv<W: std::io::Write>(
    meta: &BTreeMap<String, lde_core::MetaFeatures>,
    w: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(META_COLUMNS)?;
    for (d, mf) in meta {
        let fixed = lde_core::metamodel::FIXED_FEATURE_NAMES
            .iter()
            .zip(mf.fixed_vector())
            .filter_map(|(n, v)| v.map(|v| (n.to_string(), v)));
        let user = mf.user.iter().map(|(n, v)| (n.clone(), *v));
        for (name, v) in fixed.chain(user) {
            wtr.write_record([d.as_str(), &name, &v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_rows(rows: &[&str]) -> String {
        let mut s = RESULT_COLUMNS.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn ids_are_stable() {
        assert_eq!(dataset_uuid("iris"), dataset_uuid("iris"));
        assert_ne!(dataset_uuid("iris"), pipeline_uuid("iris"));
    }

    #[test]
    fn rows_of_one_run_merge() {
        let store = Store::in_memory();
        let text = csv_rows(&[
            "iris,PCA >> SVC,c1,0,0,normalized_accuracy,0.9",
            "iris,PCA >> SVC,c1,0,0,f1,0.8",
        ]);
        let r = ingest_results(&store, text.as_bytes(), &BTreeMap::new()).unwrap();
        assert_eq!(r.created(ArtifactKind::Run), 1);
        assert_eq!(r.rows_accepted, 2);
        let run = store
            .get_artifact(
                ArtifactKind::Run,
                run_uuid("iris", "PCA >> SVC", "c1", 0, 0),
            )
            .unwrap();
        let Artifact::Run(run) = run else { panic!() };
        assert_eq!(run.metrics.len(), 2);
        let Artifact::Pipeline(p) = store
            .get_artifact(ArtifactKind::Pipeline, pipeline_uuid("PCA >> SVC"))
            .unwrap()
        else {
            panic!()
        };
        assert_eq!(p.steps.len(), 2);
    }

    #[test]
    fn new_metric_updates_existing_run() {
        let store = Store::in_memory();
        let a = csv_rows(&["d,p,c,0,0,normalized_accuracy,0.5"]);
        let b = csv_rows(&["d,p,c,0,0,f1,0.4"]);
        ingest_results(&store, a.as_bytes(), &BTreeMap::new()).unwrap();
        let r = ingest_results(&store, b.as_bytes(), &BTreeMap::new()).unwrap();
        assert_eq!(r.updated, 1);
        assert_eq!(r.created_total(), 0);
    }

    #[test]
    fn malformed_rows_are_skipped() {
        let store = Store::in_memory();
        let text = csv_rows(&[
            "d,p,c,x,0,acc,0.5",
            "d,p,c,0,0,acc,nan",
            ",p,c,0,0,acc,0.5",
            "d,p,c,0,0,acc,0.5",
            "d,p,c,0,0,acc,0.6",
        ]);
        let r = ingest_results(&store, text.as_bytes(), &BTreeMap::new()).unwrap();
        assert_eq!(r.rows_total, 5);
        assert_eq!(r.rows_accepted, 1);
        assert_eq!(r.skipped.len(), 4);
        assert_eq!(r.skipped[0].line, 2);
    }

    #[test]
    fn metric_mapping_applies_range_check() {
        let store = Store::in_memory();
        let text = csv_rows(&["d,p,c,0,0,acc,1.5"]);
        let map = BTreeMap::from([("acc".to_string(), "normalized_accuracy".to_string())]);
        let r = ingest_results(&store, text.as_bytes(), &map).unwrap();
        assert_eq!(r.rows_accepted, 0);
        assert!(r.skipped[0].reason.contains("outside"));
    }

    #[test]
    fn missing_column_is_an_error() {
        let store = Store::in_memory();
        let err = ingest_results(&store, "dataset_id,value\n".as_bytes(), &BTreeMap::new());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn meta_features_create_and_update() {
        let store = Store::in_memory();
        let text = "dataset_id,feature,value\nd,n_instances,150\nd,n_classes,3\nd,n_classes,2.5\ne,rho,0.1\n";
        let r = ingest_meta_features(&store, text.as_bytes()).unwrap();
        assert_eq!(r.created(ArtifactKind::Dataset), 2);
        assert_eq!(r.rows_accepted, 3);
        assert_eq!(r.skipped.len(), 1);
        let r = ingest_meta_features(
            &store,
            "dataset_id,feature,value\nd,n_features,4\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(r.updated, 1);
        let keys = natural_keys(&store, ArtifactKind::Dataset);
        assert_eq!(keys[&dataset_uuid("e").to_string()], "e");
    }
}
