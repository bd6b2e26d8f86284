//! Ranking-variability report.
//!
//! For each dataset an entity-by-treatment matrix is built. Entities are
//! pipelines or parameter configurations; treatments are the split
//! configurations of the dataset (`DatasetConfigs`) or the repeats on its
//! first split configuration (`RepeatedTrials`). A cell holds the entity's
//! mean metric under that treatment. Entities lacking any treatment are
//! dropped. The reference top-N list is taken by pooled mean over
//! treatments, and a Friedman test (blocks = entities) asks whether the
//! treatments reorder them. `CrossCorpus` instead pairs internal and
//! external per-config scores of the shared top-N and applies Wilcoxon.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{friedman_test, wilcoxon_signed_rank};
use crate::metrics::{mean, RankLevel};
use crate::records::RunRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    DatasetConfigsPipeline,
    DatasetConfigsParam,
    RepeatedTrialPipeline,
    RepeatedTrialParam,
    OriginalVsReproduced,
}

impl Comparison {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparison::DatasetConfigsPipeline => "dataset_configs_pipeline",
            Comparison::DatasetConfigsParam => "dataset_configs_param",
            Comparison::RepeatedTrialPipeline => "repeated_trial_pipeline",
            Comparison::RepeatedTrialParam => "repeated_trial_param",
            Comparison::OriginalVsReproduced => "original_vs_reproduced",
        }
    }
}

/// Per-config scores from another corpus: dataset id -> config id -> score.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalResults {
    pub scores: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "external")]
pub enum VariabilityMode {
    DatasetConfigs,
    RepeatedTrials,
    CrossCorpus(ExternalResults),
}

/// Fraction of datasets with a significant test, per comparison and top-N.
/// `None` marks cells no dataset could fill (fewer entities than N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceSummary {
    pub alpha: f64,
    pub top_ns: Vec<usize>,
    pub rows: BTreeMap<Comparison, BTreeMap<usize, Option<f64>>>,
    /// Datasets that contributed to each cell.
    pub support: BTreeMap<Comparison, BTreeMap<usize, usize>>,
}

impl SignificanceSummary {
    pub fn cell(&self, row: Comparison, top_n: usize) -> Option<f64> {
        self.rows
            .get(&row)
            .and_then(|r| r.get(&top_n))
            .copied()
            .flatten()
    }

    /// Folds another summary's rows into this one.
    pub fn merge(&mut self, other: SignificanceSummary) {
        self.rows.extend(other.rows);
        self.support.extend(other.support);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("comparison");
        for n in &self.top_ns {
            let _ = write!(out, ",top_{n}");
        }
        out.push('\n');
        for (cmp, cells) in &self.rows {
            out.push_str(cmp.as_str());
            for n in &self.top_ns {
                match cells.get(n).copied().flatten() {
                    Some(f) => {
                        let _ = write!(out, ",{f:.6}");
                    }
                    None => out.push_str(",na"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetTest {
    pub dataset_id: String,
    pub comparison: Comparison,
    pub top_n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityReport {
    pub summary: SignificanceSummary,
    pub tests: Vec<DatasetTest>,
    /// Datasets skipped, with the reason.
    pub excluded: Vec<(String, String)>,
}

type Matrix = BTreeMap<String, Vec<f64>>;

/// Entity -> value per treatment, restricted to entities seen under every
/// treatment. Returns the treatment count alongside.
fn treatment_matrix(
    runs: &[&RunRecord],
    metric: &str,
    treatment_of: impl Fn(&RunRecord) -> String,
    level: RankLevel,
) -> (Matrix, usize) {
    let treatments: BTreeSet<String> = runs.iter().map(|r| treatment_of(r)).collect();
    let t_index: BTreeMap<&String, usize> =
        treatments.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let k = treatments.len();

    let mut cells: BTreeMap<(String, String), Vec<Vec<f64>>> = BTreeMap::new();
    for r in runs {
        let t = t_index[&treatment_of(r)];
        cells
            .entry((r.pipeline_id.clone(), r.pipeline_params_id.clone()))
            .or_insert_with(|| vec![Vec::new(); k])[t]
            .push(r.metrics[metric]);
    }
    let complete: BTreeMap<(String, String), Vec<f64>> = cells
        .into_iter()
        .filter(|(_, per_t)| per_t.iter().all(|v| !v.is_empty()))
        .map(|(key, per_t)| (key, per_t.iter().map(|v| mean(v)).collect()))
        .collect();

    let matrix = match level {
        RankLevel::ParamConfig => complete.into_iter().map(|((_, c), v)| (c, v)).collect(),
        RankLevel::Pipeline => {
            let mut per: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
            for ((p, _), v) in complete {
                per.entry(p).or_default().push(v);
            }
            per.into_iter()
                .map(|(p, rows)| {
                    let avg = (0..k)
                        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
                        .collect();
                    (p, avg)
                })
                .collect()
        }
    };
    (matrix, k)
}

/// Entity ids ordered by descending pooled score, ascending id on ties.
fn reference_order(pooled: &BTreeMap<String, f64>) -> Vec<String> {
    let mut ids: Vec<(&String, f64)> = pooled.iter().map(|(k, v)| (k, *v)).collect();
    ids.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ids.into_iter().map(|(k, _)| k.clone()).collect()
}

struct Accumulator {
    top_ns: Vec<usize>,
    hits: BTreeMap<Comparison, BTreeMap<usize, (usize, usize)>>,
    tests: Vec<DatasetTest>,
    alpha: f64,
}

impl Accumulator {
    fn record(&mut self, dataset: &str, cmp: Comparison, n: usize, statistic: f64, p: f64) {
        let cell = self.hits.entry(cmp).or_default().entry(n).or_default();
        cell.1 += 1;
        if p < self.alpha {
            cell.0 += 1;
        }
        self.tests.push(DatasetTest {
            dataset_id: dataset.to_string(),
            comparison: cmp,
            top_n: n,
            statistic,
            p_value: p,
        });
    }

    fn finish(self, rows: &[Comparison]) -> (SignificanceSummary, Vec<DatasetTest>) {
        let mut out_rows = BTreeMap::new();
        let mut support = BTreeMap::new();
        for &cmp in rows {
            let cells = self.hits.get(&cmp);
            let mut row = BTreeMap::new();
            let mut sup = BTreeMap::new();
            for &n in &self.top_ns {
                let (sig, total) = cells.and_then(|c| c.get(&n)).copied().unwrap_or((0, 0));
                row.insert(n, (total > 0).then(|| sig as f64 / total as f64));
                sup.insert(n, total);
            }
            out_rows.insert(cmp, row);
            support.insert(cmp, sup);
        }
        (
            SignificanceSummary {
                alpha: self.alpha,
                top_ns: self.top_ns,
                rows: out_rows,
                support,
            },
            self.tests,
        )
    }
}

pub fn variability_report(
    runs: &[RunRecord],
    dataset_ids: &[String],
    metric_name: &str,
    alpha: f64,
    top_ns: &[usize],
    mode: &VariabilityMode,
) -> Result<VariabilityReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    if top_ns.is_empty() || top_ns.contains(&0) {
        return Err(Error::invalid("top_ns must be non-empty positive sizes"));
    }
    let mut by_dataset: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        if r.metrics.contains_key(metric_name) {
            by_dataset.entry(r.dataset_id.as_str()).or_default().push(r);
        }
    }
    let mut acc = Accumulator {
        top_ns: top_ns.to_vec(),
        hits: BTreeMap::new(),
        tests: Vec::new(),
        alpha,
    };
    let mut excluded = Vec::new();

    let rows: &[Comparison] = match mode {
        VariabilityMode::DatasetConfigs => &[
            Comparison::DatasetConfigsPipeline,
            Comparison::DatasetConfigsParam,
        ],
        VariabilityMode::RepeatedTrials => &[
            Comparison::RepeatedTrialPipeline,
            Comparison::RepeatedTrialParam,
        ],
        VariabilityMode::CrossCorpus(_) => &[Comparison::OriginalVsReproduced],
    };

    for ds in dataset_ids {
        let Some(ds_runs) = by_dataset.get(ds.as_str()) else {
            excluded.push((ds.clone(), format!("no runs with metric '{metric_name}'")));
            continue;
        };
        match mode {
            VariabilityMode::DatasetConfigs | VariabilityMode::RepeatedTrials => {
                let repeated = matches!(mode, VariabilityMode::RepeatedTrials);
                let selected: Vec<&RunRecord> = if repeated {
                    first_configuration(ds_runs)
                } else {
                    ds_runs.clone()
                };
                let treatment_of = |r: &RunRecord| {
                    if repeated {
                        format!("{:010}", r.repeat_index)
                    } else {
                        r.dataset_params_id.clone()
                    }
                };
                let levels = [
                    (RankLevel::Pipeline, rows[0]),
                    (RankLevel::ParamConfig, rows[1]),
                ];
                let mut any = false;
                let mut k_seen = 0;
                for (level, cmp) in levels {
                    let (matrix, k) = treatment_matrix(&selected, metric_name, treatment_of, level);
                    k_seen = k;
                    if k < 2 {
                        continue;
                    }
                    let pooled = matrix.iter().map(|(e, v)| (e.clone(), mean(v))).collect();
                    let order = reference_order(&pooled);
                    for &n in top_ns {
                        if n < 2 || order.len() < n {
                            continue;
                        }
                        let blocks: Vec<Vec<f64>> =
                            order[..n].iter().map(|e| matrix[e].clone()).collect();
                        let t = friedman_test(&blocks)?;
                        acc.record(ds, cmp, n, t.statistic, t.p_value);
                        any = true;
                    }
                }
                if !any {
                    let what = if repeated {
                        "repeats"
                    } else {
                        "split configurations"
                    };
                    let reason = if k_seen < 2 {
                        format!("needs at least 2 {what}, found {k_seen}")
                    } else {
                        "too few complete entities for any requested top-N".to_string()
                    };
                    excluded.push((ds.clone(), reason));
                }
            }
            VariabilityMode::CrossCorpus(external) => {
                let Some(ext) = external.scores.get(ds) else {
                    excluded.push((ds.clone(), "absent from external results".into()));
                    continue;
                };
                let mut internal: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for r in ds_runs {
                    internal
                        .entry(r.pipeline_params_id.clone())
                        .or_default()
                        .push(r.metrics[metric_name]);
                }
                let shared: BTreeMap<String, (f64, f64)> = internal
                    .iter()
                    .filter_map(|(c, v)| ext.get(c).map(|e| (c.clone(), (mean(v), *e))))
                    .collect();
                let pooled = shared
                    .iter()
                    .map(|(c, (a, b))| (c.clone(), (a + b) / 2.0))
                    .collect();
                let order = reference_order(&pooled);
                let mut any = false;
                for &n in top_ns {
                    if order.len() < n {
                        continue;
                    }
                    let pairs: Vec<(f64, f64)> = order[..n].iter().map(|c| shared[c]).collect();
                    let t = wilcoxon_signed_rank(&pairs)?;
                    acc.record(
                        ds,
                        Comparison::OriginalVsReproduced,
                        n,
                        t.statistic,
                        t.p_value,
                    );
                    any = true;
                }
                if !any {
                    excluded.push((ds.clone(), format!("only {} shared configs", order.len())));
                }
            }
        }
    }
    let (summary, tests) = acc.finish(rows);
    Ok(VariabilityReport {
        summary,
        tests,
        excluded,
    })
}

/// Runs on the dataset's first split configuration: fold 0 when fold
/// indices are known, else the smallest split id.
fn first_configuration<'a>(runs: &[&'a RunRecord]) -> Vec<&'a RunRecord> {
    let by_fold: Vec<&RunRecord> = runs
        .iter()
        .copied()
        .filter(|r| r.fold_index == Some(0))
        .collect();
    if !by_fold.is_empty() {
        return by_fold;
    }
    let Some(first) = runs.iter().map(|r| r.dataset_params_id.as_str()).min() else {
        return vec![];
    };
    runs.iter()
        .copied()
        .filter(|r| r.dataset_params_id == first)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ds: &str, fold: usize, pipe: &str, cfg: &str, rep: u32, v: f64) -> RunRecord {
        RunRecord {
            run_id: format!("{ds}-{fold}-{cfg}-{rep}"),
            dataset_id: ds.into(),
            dataset_params_id: format!("{ds}-f{fold}"),
            fold_index: Some(fold),
            pipeline_id: pipe.into(),
            pipeline_params_id: cfg.into(),
            input_trained_pipeline_id: None,
            repeat_index: rep,
            metrics: BTreeMap::from([("acc".into(), v)]),
        }
    }

    /// Each fold fully reverses the config order of the previous one.
    fn alternating(ds: &str) -> Vec<RunRecord> {
        let mut out = Vec::new();
        for fold in 0..4 {
            for c in 0..4 {
                let v = if fold % 2 == 0 {
                    c as f64
                } else {
                    3.0 - c as f64
                };
                out.push(record(
                    ds,
                    fold,
                    &format!("p{}", c % 2),
                    &format!("c{c}"),
                    0,
                    v,
                ));
            }
        }
        out
    }

    #[test]
    fn pipeline_cells_are_na_above_entity_count() {
        let runs = alternating("d");
        let rep = variability_report(
            &runs,
            &["d".into()],
            "acc",
            0.05,
            &[2, 4],
            &VariabilityMode::DatasetConfigs,
        )
        .unwrap();
        assert!(rep
            .summary
            .cell(Comparison::DatasetConfigsPipeline, 2)
            .is_some());
        assert_eq!(
            rep.summary.cell(Comparison::DatasetConfigsPipeline, 4),
            None
        );
        assert!(rep
            .summary
            .cell(Comparison::DatasetConfigsParam, 4)
            .is_some());
        let csv = rep.summary.to_csv();
        assert!(csv.starts_with("comparison,top_2,top_4\n"));
        assert!(csv.contains("dataset_configs_pipeline,"));
        assert!(csv.contains(",na"));
    }

    #[test]
    fn datasets_without_runs_or_repeats_are_excluded() {
        let runs = alternating("d");
        let rep = variability_report(
            &runs,
            &["d".into(), "ghost".into()],
            "acc",
            0.05,
            &[2],
            &VariabilityMode::RepeatedTrials,
        )
        .unwrap();
        assert_eq!(rep.excluded.len(), 2);
        assert!(rep.excluded.iter().any(|(d, _)| d == "ghost"));
        assert_eq!(rep.summary.cell(Comparison::RepeatedTrialParam, 2), None);
    }

    #[test]
    fn cross_corpus_pairs_shared_configs() {
        let mut runs = Vec::new();
        for c in 0..8 {
            runs.push(record(
                "d",
                0,
                "p",
                &format!("c{c}"),
                0,
                0.5 + c as f64 * 0.01,
            ));
        }
        let ext = ExternalResults {
            scores: BTreeMap::from([(
                "d".to_string(),
                (0..8)
                    .map(|c| (format!("c{c}"), 0.1 + c as f64 * 0.02))
                    .collect(),
            )]),
        };
        let rep = variability_report(
            &runs,
            &["d".into()],
            "acc",
            0.05,
            &[5, 8, 10],
            &VariabilityMode::CrossCorpus(ext),
        )
        .unwrap();
        // Every internal score beats its external counterpart.
        assert_eq!(
            rep.summary.cell(Comparison::OriginalVsReproduced, 8),
            Some(1.0)
        );
        assert_eq!(
            rep.summary.cell(Comparison::OriginalVsReproduced, 5),
            Some(0.0)
        );
        assert_eq!(rep.summary.cell(Comparison::OriginalVsReproduced, 10), None);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(variability_report(
            &[],
            &[],
            "acc",
            1.5,
            &[10],
            &VariabilityMode::DatasetConfigs
        )
        .is_err());
    }
}
