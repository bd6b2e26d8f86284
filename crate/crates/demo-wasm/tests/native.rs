use lde_demo_wasm::{fold_layout, friedman_view, parse_matrix, regret_view};

#[test]
fn folds_are_balanced_per_class() {
    let l = fold_layout(200, 3, 0.5, 5, 9).unwrap();
    assert_eq!(l.labels.len(), 200);
    let per_fold: Vec<usize> = l.counts.iter().map(|c| c.iter().sum()).collect();
    assert_eq!(per_fold.iter().sum::<usize>(), 200);
    assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
    for c in 0..3 {
        let col: Vec<usize> = l.counts.iter().map(|f| f[c]).collect();
        assert!(
            col.iter().max().unwrap() - col.iter().min().unwrap() <= 1,
            "class {c}: {col:?}"
        );
    }
    let again = fold_layout(200, 3, 0.5, 5, 9).unwrap();
    assert_eq!(l.fold_of_row, again.fold_of_row);
}

#[test]
fn friedman_hand_case() {
    let v = friedman_view("1 2 3\n1, 2, 3\n").unwrap();
    assert!((v.statistic - 4.0).abs() < 1e-12);
    assert!((v.p_value - (-2.0f64).exp()).abs() < 1e-12);
    assert_eq!(v.mean_ranks, vec![1.0, 2.0, 3.0]);
    assert!(parse_matrix("1 x").is_err());
    assert!(friedman_view("1 2").is_err());
}

#[test]
fn regret_curves_have_horizon_length() {
    let v = regret_view(1, 8, 3, 0.1, "greedy", 10).unwrap();
    assert_eq!(v.first_run.len(), 10);
    assert_eq!(v.mean_aggregated.len(), 10);
    assert!(v.mean_aggregated.windows(2).all(|w| w[1] <= w[0]));
    assert!(regret_view(1, 8, 3, 0.1, "oracle", 10).is_err());
}

#[test]
fn wasm_wrappers_return_json() {
    let s = lde_demo_wasm::friedman_js("3 1 2\n3 2 1").unwrap();
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["ranks"][0], serde_json::json!([3.0, 1.0, 2.0]));
}
