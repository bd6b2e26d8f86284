//! Browser demo. Each operation takes plain numbers or text and returns a
//! JSON string, so the same functions run natively in tests.

use lde_core::metalearn::{compare_sources, Recommender};
use lde_core::metamodel::{Column, Table};
use lde_core::splitter::{stratified_fold_indices, SplitMix64};
use lde_core::stats::{average_ranks, friedman_test};
use lde_core::synthetic::{generate, CorpusSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct FoldLayout {
    /// Class of each row.
    pub labels: Vec<usize>,
    /// Test fold of each row.
    pub fold_of_row: Vec<usize>,
    /// `counts[f][c]`: rows of class `c` in test fold `f`.
    pub counts: Vec<Vec<usize>>,
}

/// Labels drawn with class weights `imbalance^c`, then split into `k`
/// stratified folds.
pub fn fold_layout(
    n_rows: usize,
    n_classes: usize,
    imbalance: f64,
    k: usize,
    seed: u64,
) -> Result<FoldLayout, String> {
    if n_classes == 0 || imbalance.is_nan() || imbalance <= 0.0 {
        return Err("need at least one class and a positive imbalance".into());
    }
    let weights: Vec<f64> = (0..n_classes).map(|c| imbalance.powi(c as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut rng = SplitMix64::new(seed ^ 0x5eed);
    let labels: Vec<usize> = (0..n_rows)
        .map(|_| {
            let mut u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * total;
            weights
                .iter()
                .position(|w| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(n_classes - 1)
        })
        .collect();
    let names: Vec<String> = labels.iter().map(|l| format!("class{l}")).collect();
    let table = Table::new(
        "demo",
        vec![Column::categorical("label", &names)],
        Some("label".into()),
    )
    .map_err(|e| e.to_string())?;
    let folds = stratified_fold_indices(&table, k, seed).map_err(|e| e.to_string())?;
    let mut fold_of_row = vec![0; n_rows];
    let mut counts = vec![vec![0; n_classes]; k];
    for (f, split) in folds.iter().enumerate() {
        for &i in &split.test {
            fold_of_row[i] = f;
            counts[f][labels[i]] += 1;
        }
    }
    Ok(FoldLayout {
        labels,
        fold_of_row,
        counts,
    })
}

#[derive(Serialize)]
pub struct FriedmanView {
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
}

/// Parses one block per line, values separated by commas or whitespace.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: '{t}'")))
                .collect()
        })
        .collect()
}

pub fn friedman_view(text: &str) -> Result<FriedmanView, String> {
    let blocks = parse_matrix(text)?;
    let r = friedman_test(&blocks).map_err(|e| e.to_string())?;
    let ranks: Vec<Vec<f64>> = blocks.iter().map(|b| average_ranks(b)).collect();
    let k = ranks[0].len();
    let mean_ranks = (0..k)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / ranks.len() as f64)
        .collect();
    Ok(FriedmanView {
        ranks,
        mean_ranks,
        statistic: r.statistic,
        p_value: r.p_value,
    })
}

#[derive(Serialize)]
pub struct RegretView {
    pub recommender: String,
    pub first_run: Vec<f64>,
    pub mean_aggregated: Vec<f64>,
}

/// Mean leave-one-dataset-out regret curves on a synthetic corpus.
pub fn regret_view(
    seed: u64,
    n_datasets: usize,
    n_repeats: usize,
    noise_sd: f64,
    recommender: &str,
    horizon: usize,
) -> Result<RegretView, String> {
    let rec: Recommender = recommender
        .parse()
        .map_err(|e: lde_core::Error| e.to_string())?;
    let corpus = generate(&CorpusSpec {
        n_datasets,
        n_pipelines: 5,
        configs_per_pipeline: 6,
        n_repeats,
        noise_sd,
        seed,
        ..CorpusSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let cmp = compare_sources(
        &corpus.runs,
        &corpus.meta,
        "normalized_accuracy",
        rec,
        horizon,
        0.0,
    )
    .map_err(|e| e.to_string())?;
    Ok(RegretView {
        recommender: recommender.to_string(),
        first_run: cmp.mean_first_run.values,
        mean_aggregated: cmp.mean_mean_aggregated.values,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = foldLayout)]
pub fn fold_layout_js(
    n_rows: usize,
    n_classes: usize,
    imbalance: f64,
    k: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(fold_layout(n_rows, n_classes, imbalance, k, seed as u64))
}

#[wasm_bindgen(js_name = friedman)]
pub fn friedman_js(text: &str) -> Result<String, JsValue> {
    to_js(friedman_view(text))
}

#[wasm_bindgen(js_name = regretCurves)]
pub fn regret_js(
    seed: u32,
    n_datasets: usize,
    n_repeats: usize,
    noise_sd: f64,
    recommender: &str,
    horizon: usize,
) -> Result<String, JsValue> {
    to_js(regret_view(
        seed as u64,
        n_datasets,
        n_repeats,
        noise_sd,
        recommender,
        horizon,
    ))
}
