use std::collections::BTreeMap;

use lde_core::stats::special::{chi2_sf, erfc, normal_sf};
use lde_core::stats::{
    average_ranks, friedman_test, variability_report, wilcoxon_signed_rank, Comparison, TestMethod,
    VariabilityMode,
};
use lde_core::synthetic::{generate, CorpusSpec};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided p by enumerating all 2^n sign assignments over the same ranks.
fn enumerate_wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let stat = w_plus.min(total - w_plus);
    let n = nz.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if s.min(total - s) <= stat + 1e-9 {
            hits += 1;
        }
    }
    (stat, hits as f64 / (1u64 << n) as f64)
}

proptest! {
    #[test]
    fn chi2_tail_matches_reference(x in 0.0f64..120.0, dof in 1u32..40) {
        let reference = ChiSquared::new(dof as f64).unwrap().sf(x);
        prop_assert!((chi2_sf(x, dof) - reference).abs() < 1e-10, "x={x} dof={dof}");
    }

    #[test]
    fn normal_tail_matches_reference(z in -8.0f64..8.0) {
        // statrs' own normal tail is only good to about 1e-11.
        let reference = Normal::new(0.0, 1.0).unwrap().sf(z);
        prop_assert!((normal_sf(z) - reference).abs() < 1e-10);
        prop_assert!((erfc(z) - statrs::function::erf::erfc(z)).abs() < 1e-10);
    }

    #[test]
    fn friedman_is_rank_based(
        m in prop::collection::vec(prop::collection::vec(-20i32..20, 4), 2..8),
        warp in prop::collection::vec((0i32..6, -100i32..100), 8),
    ) {
        let m: Vec<Vec<f64>> = m.iter().map(|b| b.iter().map(|&v| v as f64).collect()).collect();
        let base = friedman_test(&m).unwrap();
        // A different increasing map in every block, exact on integers.
        let warped: Vec<Vec<f64>> = m
            .iter()
            .zip(&warp)
            .map(|(b, (j, o))| b.iter().map(|v| v * v * v * 2f64.powi(*j) + *o as f64).collect())
            .collect();
        let w = friedman_test(&warped).unwrap();
        prop_assert!((base.statistic - w.statistic).abs() < 1e-9);
        prop_assert!((base.p_value - w.p_value).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_exact_equals_enumeration(diffs in prop::collection::vec(prop_oneof![
        Just(0.0), (-4i32..=4).prop_map(|v| v as f64), -3.0f64..3.0
    ], 1..=12)) {
        prop_assume!(diffs.iter().any(|d| *d != 0.0));
        let pairs: Vec<(f64, f64)> = diffs.iter().map(|d| (*d, 0.0)).collect();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        let (stat, p) = enumerate_wilcoxon(&diffs);
        prop_assert_eq!(r.method, TestMethod::WilcoxonExact);
        prop_assert_eq!(r.statistic, stat);
        prop_assert_eq!(r.p_value, p);
    }
}

#[test]
fn normal_tail_reference_points() {
    // scipy.stats.norm.sf
    for (z, p) in [
        (0.5, 0.3085375387259869),
        (1.0, 0.15865525393145707),
        (2.0, 0.022750131948179195),
        (3.0, 0.0013498980316300933),
    ] {
        assert!((normal_sf(z) - p).abs() < 1e-14, "z={z}");
    }
}

#[test]
fn chi2_known_points() {
    assert!((chi2_sf(4.0, 2) - (-2.0f64).exp()).abs() < 1e-10);
    assert!((chi2_sf(3.841458820694124, 1) - 0.05).abs() < 1e-10);
    assert_eq!(chi2_sf(0.0, 3), 1.0);
}

/// Repeated trials with i.i.d. noise carry no treatment effect, so the
/// fraction of significant datasets should sit near alpha.
#[test]
fn null_repeats_are_calibrated() {
    let corpus = generate(&CorpusSpec {
        n_datasets: 300,
        n_pipelines: 4,
        configs_per_pipeline: 5,
        n_folds: 1,
        n_repeats: 5,
        noise_sd: 0.05,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let rep = variability_report(
        &corpus.runs,
        &corpus.dataset_ids(),
        "normalized_accuracy",
        0.05,
        &[10],
        &VariabilityMode::RepeatedTrials,
    )
    .unwrap();
    let f = rep
        .summary
        .cell(Comparison::RepeatedTrialParam, 10)
        .unwrap();
    assert!((f - 0.05).abs() <= 0.03, "fraction {f}");
    assert_eq!(
        rep.summary.support[&Comparison::RepeatedTrialParam][&10],
        300
    );
    // 4 pipelines cannot fill a top-10 cell.
    assert_eq!(
        rep.summary.cell(Comparison::RepeatedTrialPipeline, 10),
        None
    );
}

#[test]
fn report_json_shape() {
    let corpus = generate(&CorpusSpec {
        n_datasets: 3,
        n_folds: 3,
        n_repeats: 1,
        ..Default::default()
    })
    .unwrap();
    let rep = variability_report(
        &corpus.runs,
        &corpus.dataset_ids(),
        "normalized_accuracy",
        0.05,
        &[5, 10],
        &VariabilityMode::DatasetConfigs,
    )
    .unwrap();
    let v = serde_json::to_value(&rep).unwrap();
    assert!(v["summary"]["rows"]["dataset_configs_param"]["5"].is_number());
    let tests_per_ds: BTreeMap<&str, usize> = rep.tests.iter().fold(BTreeMap::new(), |mut m, t| {
        *m.entry(t.dataset_id.as_str()).or_default() += 1;
        m
    });
    assert!(tests_per_ds.values().all(|&c| c == 4));
}
