use std::collections::BTreeMap;

use lde_core::metalearn::{
    build_greedy_portfolio, compare_sources, dataset_distance, evaluate_regret, knd_recommend,
    portfolio_objective, ConfigId, GreedyPlan, RecommendationPlan, Recommender, ResultsMatrix,
    Standardizer,
};
use lde_core::metamodel::{MetaFeatures, FIXED_FEATURE_NAMES};
use lde_core::{Result, RunRecord};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn meta(v: &[f64]) -> MetaFeatures {
    let mut m = MetaFeatures::default();
    for (name, x) in FIXED_FEATURE_NAMES.iter().zip(v) {
        let x = if name.starts_with("n_") {
            x.abs().round()
        } else {
            *x
        };
        m.set(name, x).unwrap();
    }
    m
}

fn matrix(rows: &[Vec<Option<f64>>], metas: &[MetaFeatures]) -> ResultsMatrix {
    let mut cells = Vec::new();
    let mut mm = BTreeMap::new();
    for (r, row) in rows.iter().enumerate() {
        let d = format!("d{r:02}");
        mm.insert(d.clone(), metas.get(r).cloned().unwrap_or_default());
        for (c, v) in row.iter().enumerate() {
            if let Some(v) = v {
                cells.push((d.clone(), ConfigId::new("p", format!("c{c:02}")), *v));
            }
        }
    }
    let m = ResultsMatrix::from_cells(cells, &mm).unwrap();
    assert_eq!(
        m.n_configs(),
        rows[0].len(),
        "fixture needs every column present somewhere"
    );
    m
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, missing: f64) -> ResultsMatrix {
    let mut data: Vec<Vec<Option<f64>>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| (!rng.random_bool(missing)).then(|| rng.random_range(-0.2..1.0)))
                .collect()
        })
        .collect();
    for c in 0..cols {
        if data.iter().all(|r| r[c].is_none()) {
            data[0][c] = Some(rng.random_range(0.0..1.0));
        }
    }
    for row in data.iter_mut() {
        if row.iter().all(Option::is_none) {
            row[0] = Some(rng.random_range(0.0..1.0));
        }
    }
    let metas: Vec<MetaFeatures> = (0..rows)
        .map(|_| {
            meta(
                &(0..10)
                    .map(|_| rng.random_range(0.0..50.0))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    matrix(&data, &metas)
}

/// Proposes a seeded random order; ignores observations.
struct RandomPlan {
    order: Vec<usize>,
}

impl RecommendationPlan for RandomPlan {
    fn next(&mut self) -> Option<usize> {
        self.order.pop()
    }
    fn observe(&mut self, _: usize, _: f64) -> Result<()> {
        Ok(())
    }
}

fn meta_vec() -> impl Strategy<Value = MetaFeatures> {
    prop::collection::vec(0.0f64..100.0, 10).prop_map(|v| meta(&v))
}

proptest! {
    #[test]
    fn regret_curves_are_monotone_and_reach_zero(seed in any::<u64>(), rows in 2usize..8, cols in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, rows, cols, 0.3);
        let held = rng.random_range(0..rows);
        let truth = &m.cells[held];
        prop_assume!(truth.iter().any(Option::is_some));
        let train = m.without_row(held);
        let mut order: Vec<usize> = (0..cols).collect();
        order.shuffle(&mut rng);
        let mut plans: Vec<Box<dyn RecommendationPlan>> = vec![
            Box::new(RandomPlan { order }),
            Box::new(GreedyPlan::new(&train, cols)),
            Box::new(knd_recommend(&m.meta[held], &train, 1 + rng.random_range(0..rows - 1), cols).unwrap()),
        ];
        for plan in plans.iter_mut() {
            let curve = evaluate_regret(plan.as_mut(), truth, 0.0, cols + 2).unwrap();
            prop_assert!(curve.values.iter().all(|r| *r >= 0.0));
            prop_assert!(curve.values.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(curve.final_regret(), 0.0);
        }
    }

    #[test]
    fn knd_proposals_are_distinct_candidates(seed in any::<u64>(), k in 1usize..5, budget in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 6, 10, 0.4);
        let query = m.meta[0].clone();
        let mut plan = knd_recommend(&query, &m, k, budget).unwrap();
        let mut seen = vec![false; m.n_configs()];
        let mut count = 0;
        while let Some(c) = plan.next() {
            prop_assert!(c < m.n_configs());
            prop_assert!(!seen[c]);
            seen[c] = true;
            count += 1;
            plan.observe(c, rng.random()).unwrap();
        }
        prop_assert_eq!(count, budget.min(m.n_configs()));
    }

    #[test]
    fn greedy_objective_grows_with_size(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 6, 10, 0.2);
        let mut last = f64::NEG_INFINITY;
        for s in 1..=10 {
            let p = build_greedy_portfolio(&m, s);
            prop_assert!(p.indices.len() <= s);
            let mut sorted = p.indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), p.indices.len());
            let obj = portfolio_objective(&m, &p.indices);
            prop_assert!(obj >= last - 1e-12);
            last = obj;
        }
    }

    #[test]
    fn greedy_within_bound_of_exhaustive(seed in any::<u64>(), cols in 3usize..=12, s in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng, 5, cols, 0.2);
        let base = portfolio_objective(&m, &[]);
        let greedy = portfolio_objective(&m, &build_greedy_portfolio(&m, s).indices) - base;
        let mut best = 0.0f64;
        let mut idx = vec![0usize; s];
        fn rec(m: &ResultsMatrix, start: usize, depth: usize, idx: &mut Vec<usize>, best: &mut f64, base: f64) {
            if depth == idx.len() {
                *best = best.max(portfolio_objective(m, idx) - base);
                return;
            }
            for c in start..m.n_configs() {
                idx[depth] = c;
                rec(m, c + 1, depth + 1, idx, best, base);
            }
        }
        rec(&m, 0, 0, &mut idx, &mut best, base);
        prop_assert!(greedy >= (1.0 - (-1.0f64).exp()) * best - 1e-12, "{greedy} vs {best}");
    }

    #[test]
    fn distance_is_a_metric(corpus in prop::collection::vec(meta_vec(), 2..6), a in meta_vec(), b in meta_vec(), c in meta_vec()) {
        let st = Standardizer::fit(&corpus).unwrap();
        let d = |x: &MetaFeatures, y: &MetaFeatures| dataset_distance(x, y, &st).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }
}

/// Planted structure: query sits closest to one corpus row; the first
/// proposal must be that row's argmax, found here by brute force.
#[test]
fn knd_first_proposal_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let m = random_matrix(&mut rng, 5, 6, 0.0);
        let planted = rng.random_range(0..5);
        let mut q = m.meta[planted].clone();
        q.class_entropy = q.class_entropy.map(|e| e + 0.01);

        // Independent z-scoring with population standard deviation.
        let vecs: Vec<[Option<f64>; 10]> = m.meta.iter().map(MetaFeatures::fixed_vector).collect();
        let qv = q.fixed_vector();
        let dist: Vec<f64> = vecs
            .iter()
            .map(|v| {
                (0..10)
                    .map(|j| {
                        let col: Vec<f64> = vecs.iter().map(|r| r[j].unwrap()).collect();
                        let mu = col.iter().sum::<f64>() / 5.0;
                        let sd = (col.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 5.0).sqrt();
                        if sd == 0.0 {
                            0.0
                        } else {
                            ((qv[j].unwrap() - mu) / sd - (v[j].unwrap() - mu) / sd).abs()
                        }
                    })
                    .sum()
            })
            .collect();
        let nearest = (0..5).min_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
        assert_eq!(nearest, planted);
        let row = &m.cells[nearest];
        let argmax = (0..6)
            .max_by(|&a, &b| row[a].unwrap().total_cmp(&row[b].unwrap()).then(b.cmp(&a)))
            .unwrap();
        let mut plan = knd_recommend(&q, &m, 1, 6).unwrap();
        assert_eq!(plan.next(), Some(argmax));
    }
}

fn runs(values: &[(usize, usize, u32, f64)]) -> Vec<RunRecord> {
    values
        .iter()
        .map(|&(d, c, rep, v)| RunRecord {
            run_id: format!("r{d}-{c}-{rep}"),
            dataset_id: format!("d{d}"),
            dataset_params_id: format!("d{d}-s"),
            fold_index: Some(0),
            pipeline_id: "p".into(),
            pipeline_params_id: format!("c{c}"),
            input_trained_pipeline_id: None,
            repeat_index: rep,
            metrics: BTreeMap::from([("acc".to_string(), v)]),
        })
        .collect()
}

#[test]
fn sources_coincide_without_run_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut single = Vec::new();
    let mut repeated = Vec::new();
    for d in 0..6 {
        for c in 0..8 {
            let v = rng.random_range(0.0..1.0);
            single.push((d, c, 0, v));
            for rep in 0..3 {
                repeated.push((d, c, rep, v));
            }
        }
    }
    for corpus in [runs(&single), runs(&repeated)] {
        for rec in [Recommender::Greedy, Recommender::Knd { k: 2 }] {
            let cmp = compare_sources(&corpus, &BTreeMap::new(), "acc", rec, 5, 0.0).unwrap();
            assert_eq!(cmp.per_dataset.len(), 6);
            for d in &cmp.per_dataset {
                assert_eq!(d.first_run, d.mean_aggregated);
            }
        }
    }
}

#[test]
fn full_horizon_exhausts_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let vals: Vec<(usize, usize, u32, f64)> = (0..5)
        .flat_map(|d| (0..7).map(move |c| (d, c)))
        .flat_map(|(d, c)| {
            let base = rng.random_range(0.0..1.0);
            (0..3)
                .map(move |rep| (d, c, rep, base + rep as f64 * 0.01))
                .collect::<Vec<_>>()
        })
        .collect();
    let corpus = runs(&vals);
    for rec in [Recommender::Greedy, Recommender::Knd { k: 3 }] {
        let cmp = compare_sources(&corpus, &BTreeMap::new(), "acc", rec, 7, 0.0).unwrap();
        for d in &cmp.per_dataset {
            assert_eq!(d.first_run.final_regret(), 0.0);
            assert_eq!(d.mean_aggregated.final_regret(), 0.0);
        }
        let csv = cmp.to_csv();
        assert!(csv.starts_with("dataset_id,source,iteration,regret\n"));
        assert_eq!(csv.lines().count(), 1 + (5 + 1) * 2 * 7);
    }
}

#[test]
fn datasets_without_results_are_excluded() {
    let mut corpus = runs(&[
        (0, 0, 0, 0.5),
        (0, 1, 0, 0.2),
        (1, 0, 0, 0.1),
        (1, 1, 0, 0.9),
    ]);
    corpus.extend(runs(&[(2, 0, 0, 0.3)]).into_iter().map(|mut r| {
        r.metrics = BTreeMap::from([("other".to_string(), 0.3)]);
        r
    }));
    let cmp = compare_sources(
        &corpus,
        &BTreeMap::new(),
        "acc",
        Recommender::Greedy,
        3,
        0.0,
    )
    .unwrap();
    assert_eq!(cmp.per_dataset.len(), 2);
    // Greedy trained on the other row proposes its argmax first.
    assert_eq!(cmp.per_dataset[0].first_run.values, vec![0.3, 0.0, 0.0]);
}

#[test]
fn observing_unproposed_config_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_matrix(&mut rng, 3, 4, 0.0);
    let mut plan = GreedyPlan::new(&m, 4);
    assert!(matches!(
        plan.observe(2, 0.1),
        Err(lde_core::Error::Contract(_))
    ));
}
