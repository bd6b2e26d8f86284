//! Deterministic, seed-controlled dataset splitting.
//!
//! Randomness comes from [`SplitMix64`] seeded directly with the split seed.
//! Stratified k-fold: rows are grouped by target label (missing labels form
//! their own stratum), strata are visited in ascending label order, each
//! stratum's row list is shuffled with Fisher-Yates from one shared generator
//! stream, and rows are dealt round-robin to folds. The dealing position
//! carries over from one stratum to the next, which keeps fold sizes within
//! one of each other as well as per-class counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::metamodel::{Cell, CommonHeader, DatasetParameters, SplitMethod, Table};
use crate::{Error, Result};

/// SplitMix64 (Steele, Lea and Flood). State advances by the golden-ratio
/// increment; output is the mix of the new state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `[0, bound)` by Lemire's multiply-and-reject.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = (self.next_u64() as u128) * (bound as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Fisher-Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

const MISSING_STRATUM: &str = "\u{0}missing";

fn strata(table: &Table) -> Result<BTreeMap<String, Vec<usize>>> {
    let target = table
        .target()
        .ok_or_else(|| Error::invalid("stratified splitting needs a target column"))?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, cell) in target.values.iter().enumerate() {
        let label = Cell::label(cell).unwrap_or_else(|| MISSING_STRATUM.to_string());
        groups.entry(label).or_default().push(i);
    }
    Ok(groups)
}

/// Test-fold membership for every fold, as sorted index lists.
pub fn stratified_fold_indices(table: &Table, k: usize, seed: u64) -> Result<Vec<SplitIndices>> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    let n = table.n_rows();
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds {n} rows")));
    }
    let groups = strata(table)?;
    let mut rng = SplitMix64::new(seed);
    let mut tests: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next_fold = 0;
    for (_, mut rows) in groups {
        rng.shuffle(&mut rows);
        for row in rows {
            tests[next_fold].push(row);
            next_fold = (next_fold + 1) % k;
        }
    }
    Ok(tests
        .into_iter()
        .map(|mut test| {
            test.sort_unstable();
            let mut in_test = vec![false; n];
            for &i in &test {
                in_test[i] = true;
            }
            let train = (0..n).filter(|&i| !in_test[i]).collect();
            SplitIndices { train, test }
        })
        .collect())
}

/// One `DatasetParameters` per fold with explicit indices recorded.
pub fn make_stratified_folds(
    table: &Table,
    k: usize,
    seed: u64,
    dataset_id: Uuid,
    header: &CommonHeader,
) -> Result<Vec<DatasetParameters>> {
    let folds = stratified_fold_indices(table, k, seed)?;
    Ok(folds
        .into_iter()
        .enumerate()
        .map(|(fold_index, split)| DatasetParameters {
            header: CommonHeader {
                id: Uuid::nil(),
                ..header.clone()
            },
            dataset_id,
            split_method: SplitMethod::StratifiedKfold,
            train_ratio: (k - 1) as f64 / k as f64,
            n_folds: k,
            fold_index,
            seed,
            n_instances: Some(table.n_rows()),
            train_indices: Some(split.train),
            test_indices: Some(split.test),
        })
        .collect())
}

/// Holdout test set: the first `ceil((1 - train_ratio) * n)` rows of a
/// seeded shuffle of all rows.
pub fn holdout_indices(n: usize, train_ratio: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::invalid("train_ratio must lie in (0, 1)"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let n_test = (((1.0 - train_ratio) * n as f64).ceil() as usize).min(n);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Recovers the exact split described by `params`.
pub fn realize_split(table: &Table, params: &DatasetParameters) -> Result<SplitIndices> {
    let n = table.n_rows();
    if let Some(expected) = params.n_instances {
        if expected != n {
            return Err(Error::Integrity(format!(
                "split was recorded for {expected} rows, table has {n}"
            )));
        }
    }
    if let (Some(train), Some(test)) = (&params.train_indices, &params.test_indices) {
        if let Some(bad) = train.iter().chain(test).find(|&&i| i >= n) {
            return Err(Error::Integrity(format!(
                "stored index {bad} out of bounds for {n} rows"
            )));
        }
        return Ok(SplitIndices {
            train: train.clone(),
            test: test.clone(),
        });
    }
    match params.split_method {
        SplitMethod::StratifiedKfold => {
            if params.fold_index >= params.n_folds {
                return Err(Error::invalid("fold_index must be smaller than n_folds"));
            }
            let mut folds = stratified_fold_indices(table, params.n_folds, params.seed)?;
            Ok(folds.swap_remove(params.fold_index))
        }
        SplitMethod::Holdout => holdout_indices(n, params.train_ratio, params.seed),
        SplitMethod::Explicit => Err(Error::invalid("explicit split without stored indices")),
    }
}
