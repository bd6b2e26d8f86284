use serde::{Deserialize, Serialize};

use super::ResultsMatrix;
use crate::metamodel::{MetaFeatures, FIXED_FEATURE_NAMES};
use crate::stats::average_ranks;
use crate::{Error, Result};

const N_FIXED: usize = FIXED_FEATURE_NAMES.len();

/// Per-feature corpus mean and population standard deviation. A feature
/// never observed in the corpus has no parameters and is ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    params: Option<Vec<Option<(f64, f64)>>>,
}

impl Standardizer {
    pub fn fit(corpus: &[MetaFeatures]) -> Result<Self> {
        if corpus.len() < 2 {
            return Err(Error::InvalidState(format!(
                "standardizer needs at least 2 datasets, got {}",
                corpus.len()
            )));
        }
        let vectors: Vec<[Option<f64>; N_FIXED]> =
            corpus.iter().map(|m| m.fixed_vector()).collect();
        let params = (0..N_FIXED)
            .map(|j| {
                let vals: Vec<f64> = vectors.iter().filter_map(|v| v[j]).collect();
                if vals.is_empty() {
                    return None;
                }
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                Some((mean, var.sqrt()))
            })
            .collect();
        Ok(Self {
            params: Some(params),
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.params.is_some()
    }

    /// z-scores of the fixed features. Missing features sit at the corpus
    /// mean (z = 0), as do zero-variance features.
    pub fn transform(&self, m: &MetaFeatures) -> Result<[f64; N_FIXED]> {
        let params = self
            .params
            .as_ref()
            .ok_or_else(|| Error::InvalidState("standardizer is not fitted".into()))?;
        let v = m.fixed_vector();
        let mut z = [0.0; N_FIXED];
        for j in 0..N_FIXED {
            if let (Some(x), Some((mean, sd))) = (v[j], params[j]) {
                if sd > 0.0 {
                    z[j] = (x - mean) / sd;
                }
            }
        }
        Ok(z)
    }
}

/// L1 distance between z-scored fixed meta-features.
pub fn dataset_distance(
    a: &MetaFeatures,
    b: &MetaFeatures,
    standardizer: &Standardizer,
) -> Result<f64> {
    let za = standardizer.transform(a)?;
    let zb = standardizer.transform(b)?;
    Ok(za.iter().zip(&zb).map(|(x, y)| (x - y).abs()).sum())
}

/// Distance from `query` to every row of `corpus`. A single-row corpus
/// cannot be standardized and yields distance 0.
pub(crate) fn row_distances(query: &MetaFeatures, corpus: &ResultsMatrix) -> Result<Vec<f64>> {
    if corpus.n_rows() < 2 {
        return Ok(vec![0.0; corpus.n_rows()]);
    }
    let st = Standardizer::fit(&corpus.meta)?;
    corpus
        .meta
        .iter()
        .map(|m| dataset_distance(query, m, &st))
        .collect()
}

/// The `k` closest corpus datasets, ascending distance then ascending id.
pub fn nearest_datasets(
    query: &MetaFeatures,
    corpus: &ResultsMatrix,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let d = row_distances(query, corpus)?;
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    Ok(idx
        .into_iter()
        .take(k)
        .map(|i| (corpus.datasets[i].clone(), d[i]))
        .collect())
}

/// Spearman rank correlation with average ranks for ties. Zero when either
/// side is constant or fewer than two pairs are given.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return 0.0;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}
