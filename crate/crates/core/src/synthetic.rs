//! Seeded synthetic run corpora for calibration experiments and demos.
//!
//! Datasets belong to latent clusters; each cluster has its own
//! config-performance profile and meta-feature centre, so that datasets with
//! similar meta-features also rank configs similarly. A run's value is
//!
//! ```text
//! mu[d][c] + fold_shift[d][f] + interaction[d][c][f] + noise
//! ```
//!
//! with Gaussian components whose scales are set on [`CorpusSpec`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::metamodel::MetaFeatures;
use crate::records::RunRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_datasets: usize,
    pub n_pipelines: usize,
    pub configs_per_pipeline: usize,
    pub n_folds: usize,
    pub n_repeats: usize,
    pub n_clusters: usize,
    /// Per-run Gaussian noise.
    pub noise_sd: f64,
    /// Shift shared by all configs on one split of one dataset.
    pub fold_shift_sd: f64,
    /// Config-specific shift on one split.
    pub interaction_sd: f64,
    /// Spread of a dataset's true means around its cluster profile.
    pub dataset_sd: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_datasets: 50,
            n_pipelines: 10,
            configs_per_pipeline: 10,
            n_folds: 1,
            n_repeats: 5,
            n_clusters: 5,
            noise_sd: 0.1,
            fold_shift_sd: 0.0,
            interaction_sd: 0.0,
            dataset_sd: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub runs: Vec<RunRecord>,
    pub meta: BTreeMap<String, MetaFeatures>,
    /// True mean per dataset and config, `(pipeline_id, pipeline_params_id)`.
    pub true_means: BTreeMap<String, BTreeMap<(String, String), f64>>,
}

impl SyntheticCorpus {
    pub fn dataset_ids(&self) -> Vec<String> {
        self.meta.keys().cloned().collect()
    }
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sd).map_err(|e| Error::invalid(format!("bad standard deviation {sd}: {e}")))
}

pub fn dataset_name(d: usize) -> String {
    format!("ds{d:03}")
}

pub fn generate(spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    if spec.n_datasets == 0 || spec.n_pipelines == 0 || spec.configs_per_pipeline == 0 {
        return Err(Error::invalid(
            "corpus needs datasets, pipelines and configs",
        ));
    }
    if spec.n_folds == 0 || spec.n_repeats == 0 || spec.n_clusters == 0 {
        return Err(Error::invalid("corpus needs folds, repeats and clusters"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = normal(spec.noise_sd)?;
    let shift = normal(spec.fold_shift_sd)?;
    let inter = normal(spec.interaction_sd)?;
    let ds_dev = normal(spec.dataset_sd)?;
    let unit = normal(1.0)?;

    let configs: Vec<(String, String)> = (0..spec.n_pipelines)
        .flat_map(|p| {
            (0..spec.configs_per_pipeline)
                .map(move |c| (format!("pipe{p:02}"), format!("pipe{p:02}-cfg{c:02}")))
        })
        .collect();
    let profiles: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| configs.iter().map(|_| rng.random_range(0.2..0.8)).collect())
        .collect();
    let centres: Vec<[f64; 4]> = (0..spec.n_clusters)
        .map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0)))
        .collect();

    let mut runs = Vec::new();
    let mut meta = BTreeMap::new();
    let mut true_means = BTreeMap::new();
    for d in 0..spec.n_datasets {
        let ds = dataset_name(d);
        let cluster = rng.random_range(0..spec.n_clusters);
        let c = centres[cluster];
        let mut mf = MetaFeatures {
            n_instances: Some((1000.0 * (1.0 + (c[0] + 0.3 * unit.sample(&mut rng)).exp())) as u64),
            n_features: Some((10.0 * (1.0 + (c[1] + 0.3 * unit.sample(&mut rng)).exp())) as u64),
            n_classes: Some(2 + (c[2].abs() as u64 % 5)),
            class_entropy: Some((1.0 + c[2].abs() * 0.3 + 0.05 * unit.sample(&mut rng)).max(0.0)),
            missing_fraction: Some(
                ((c[3] + 3.0) / 60.0 + 0.005 * unit.sample(&mut rng)).clamp(0.0, 1.0),
            ),
            ..Default::default()
        };
        mf.n_numeric = mf.n_features;
        mf.n_categorical = Some(0);
        meta.insert(ds.clone(), mf);

        let mu: Vec<f64> = profiles[cluster]
            .iter()
            .map(|p| p + ds_dev.sample(&mut rng))
            .collect();
        let fold_shift: Vec<f64> = (0..spec.n_folds).map(|_| shift.sample(&mut rng)).collect();
        true_means.insert(
            ds.clone(),
            configs.iter().cloned().zip(mu.iter().copied()).collect(),
        );
        for (ci, (pipe, cfg)) in configs.iter().enumerate() {
            for (f, fs) in fold_shift.iter().enumerate() {
                let offset = fs + inter.sample(&mut rng);
                for r in 0..spec.n_repeats {
                    // normalized accuracy is bounded
                    let v = (mu[ci] + offset + noise.sample(&mut rng)).clamp(-1.0, 1.0);
                    runs.push(RunRecord {
                        run_id: format!("{ds}-{cfg}-f{f}-r{r}"),
                        dataset_id: ds.clone(),
                        dataset_params_id: format!("{ds}-f{f}"),
                        fold_index: Some(f),
                        pipeline_id: pipe.clone(),
                        pipeline_params_id: cfg.clone(),
                        input_trained_pipeline_id: None,
                        repeat_index: r as u32,
                        metrics: BTreeMap::from([("normalized_accuracy".to_string(), v)]),
                    });
                }
            }
        }
    }
    Ok(SyntheticCorpus {
        runs,
        meta,
        true_means,
    })
}
