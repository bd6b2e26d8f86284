use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::metamodel::MetaFeatures;
use crate::metrics::{collapse, ResultSource};
use crate::records::RunRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConfigId {
    pub pipeline_id: String,
    pub pipeline_params_id: String,
}

impl ConfigId {
    pub fn new(pipeline_id: impl Into<String>, pipeline_params_id: impl Into<String>) -> Self {
        Self {
            pipeline_id: pipeline_id.into(),
            pipeline_params_id: pipeline_params_id.into(),
        }
    }
}

impl std::fmt::Display for ConfigId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.pipeline_id, self.pipeline_params_id)
    }
}

/// Datasets by configs. Rows and columns are kept in ascending id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsMatrix {
    pub datasets: Vec<String>,
    pub configs: Vec<ConfigId>,
    pub cells: Vec<Vec<Option<f64>>>,
    /// One entry per row; default when unknown.
    pub meta: Vec<MetaFeatures>,
    /// Value observed for configs that have no result, e.g. failed runs.
    pub floor: f64,
}

#[derive(Debug, Deserialize, Serialize)]
struct CsvCell {
    dataset_id: String,
    pipeline_id: String,
    pipeline_params_id: String,
    value: f64,
}

impl ResultsMatrix {
    /// Builds a matrix from (dataset, config, value) triples. Later
    /// duplicates overwrite earlier ones.
    pub fn from_cells(
        cells: impl IntoIterator<Item = (String, ConfigId, f64)>,
        meta: &BTreeMap<String, MetaFeatures>,
    ) -> Result<Self> {
        let mut map: BTreeMap<String, BTreeMap<ConfigId, f64>> = BTreeMap::new();
        let mut configs = BTreeSet::new();
        for (d, c, v) in cells {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value for {d} / {c}")));
            }
            configs.insert(c.clone());
            map.entry(d).or_default().insert(c, v);
        }
        let configs: Vec<ConfigId> = configs.into_iter().collect();
        let datasets: Vec<String> = map.keys().cloned().collect();
        let cells = map
            .values()
            .map(|row| configs.iter().map(|c| row.get(c).copied()).collect())
            .collect();
        let meta = datasets
            .iter()
            .map(|d| meta.get(d).cloned().unwrap_or_default())
            .collect();
        Ok(Self {
            datasets,
            configs,
            cells,
            meta,
            floor: 0.0,
        })
    }

    /// One cell per (dataset, config) group, collapsed with `source`.
    pub fn from_records(
        runs: &[RunRecord],
        metric_name: &str,
        source: ResultSource,
        meta: &BTreeMap<String, MetaFeatures>,
    ) -> Result<Self> {
        let mut groups: BTreeMap<(&str, ConfigId), Vec<&RunRecord>> = BTreeMap::new();
        for r in runs.iter().filter(|r| !r.failed()) {
            groups
                .entry((
                    r.dataset_id.as_str(),
                    ConfigId::new(&r.pipeline_id, &r.pipeline_params_id),
                ))
                .or_default()
                .push(r);
        }
        let cells = groups.into_iter().filter_map(|((d, c), g)| {
            collapse(&g, metric_name, source).map(|v| (d.to_string(), c, v))
        });
        Self::from_cells(cells, meta)
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.datasets.len()
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn row_index(&self, dataset_id: &str) -> Option<usize> {
        self.datasets
            .binary_search_by(|d| d.as_str().cmp(dataset_id))
            .ok()
    }

    pub fn config_index(&self, config: &ConfigId) -> Option<usize> {
        self.configs.binary_search(config).ok()
    }

    /// Copy with one row removed; columns stay aligned.
    pub fn without_row(&self, row: usize) -> Self {
        let mut m = self.clone();
        m.datasets.remove(row);
        m.cells.remove(row);
        m.meta.remove(row);
        m
    }

    /// Mean of each column over its non-missing cells.
    pub fn column_means(&self) -> Vec<Option<f64>> {
        (0..self.n_configs())
            .map(|c| {
                let vals: Vec<f64> = self.cells.iter().filter_map(|row| row[c]).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect()
    }

    /// Column indices ordered by descending mean, ascending id on ties.
    /// Columns without any value come last.
    pub fn best_first_by_mean(&self) -> Vec<usize> {
        let means = self.column_means();
        let mut idx: Vec<usize> = (0..self.n_configs()).collect();
        idx.sort_by(|&a, &b| {
            let ka = means[a].unwrap_or(f64::NEG_INFINITY);
            let kb = means[b].unwrap_or(f64::NEG_INFINITY);
            kb.total_cmp(&ka).then(a.cmp(&b))
        });
        idx
    }

    /// Long-format CSV: `dataset_id,pipeline_id,pipeline_params_id,value`,
    /// one line per present cell.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (d, row) in self.datasets.iter().zip(&self.cells) {
            for (c, v) in self.configs.iter().zip(row) {
                if let Some(v) = v {
                    wr.serialize(CsvCell {
                        dataset_id: d.clone(),
                        pipeline_id: c.pipeline_id.clone(),
                        pipeline_params_id: c.pipeline_params_id.clone(),
                        value: *v,
                    })?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, meta: &BTreeMap<String, MetaFeatures>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut cells = Vec::new();
        for rec in rd.deserialize::<CsvCell>() {
            let rec = rec?;
            cells.push((
                rec.dataset_id,
                ConfigId::new(rec.pipeline_id, rec.pipeline_params_id),
                rec.value,
            ));
        }
        Self::from_cells(cells, meta)
    }
}
