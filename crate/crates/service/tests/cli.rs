use std::path::Path;
use std::process::Command;

fn lde(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_lde"))
        .args(args)
        .env_remove("LDE_ROOT")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "lde {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn analysis_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    let meta = dir.path().join("meta.csv");
    let root = dir.path().join("store");
    lde(&[
        "synth",
        "--seed",
        "7",
        "--datasets",
        "6",
        "--pipelines",
        "2",
        "--configs",
        "3",
        "--folds",
        "2",
        "--repeats",
        "3",
        "--out",
        p(&results),
        "--meta-out",
        p(&meta),
    ]);
    let report = lde(&["ingest", "results", p(&results), "--root", p(&root)]);
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["rows_accepted"], 6 * 2 * 3 * 2 * 3);
    assert_eq!(v["created"]["run"], 6 * 2 * 3 * 2 * 3);
    lde(&["ingest", "meta-features", p(&meta), "--root", p(&root)]);

    let commands: Vec<Vec<&str>> = vec![
        vec![
            "rank",
            "--dataset",
            "ds000",
            "--level",
            "params",
            "--n",
            "4",
        ],
        vec!["rank", "--pipeline", "pipe01", "--source", "first-run"],
        vec!["variability", "--top-n", "2,3", "--seed", "3"],
        vec!["variability", "--mode", "repeated_trials", "--top-n", "2"],
        vec!["regret", "--recommender", "greedy", "--horizon", "5"],
        vec![
            "regret",
            "--recommender",
            "knd:2",
            "--horizon",
            "5",
            "--source",
            "first-run",
        ],
    ];
    for cmd in commands {
        let mut args = cmd.clone();
        args.extend(["--root", p(&root)]);
        let a = lde(&args);
        let b = lde(&args);
        assert!(!a.is_empty(), "{cmd:?}");
        assert_eq!(a, b, "{cmd:?}");
    }

    let q = dir.path().join("query.json");
    std::fs::write(&q, r#"{"n_instances": 300, "n_classes": 3}"#).unwrap();
    let out = dir.path().join("rec.json");
    let args = [
        "recommend",
        "--meta",
        p(&q),
        "--budget",
        "3",
        "--root",
        p(&root),
        "--out",
        p(&out),
    ];
    lde(&args);
    let first = std::fs::read_to_string(&out).unwrap();
    lde(&args);
    assert_eq!(first, std::fs::read_to_string(&out).unwrap());
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["recommendations"].as_array().unwrap().len(), 3);
}

#[test]
fn split_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let mut text = String::from("x,label\n");
    for i in 0..40 {
        text.push_str(&format!("{i},{}\n", ["a", "b", "c"][i % 3]));
    }
    std::fs::write(&table, text).unwrap();
    let run = |seed: &str| {
        lde(&[
            "split",
            p(&table),
            "--target",
            "label",
            "--k",
            "4",
            "--seed",
            seed,
        ])
    };
    let strip = |s: String| -> serde_json::Value {
        let mut v: serde_json::Value = serde_json::from_str(&s).unwrap();
        for f in v.as_array_mut().unwrap() {
            f.as_object_mut().unwrap().remove("created_at");
        }
        v
    };
    let a = strip(run("11"));
    assert_eq!(a, strip(run("11")));
    assert_ne!(a, strip(run("12")));
    assert_eq!(a.as_array().unwrap().len(), 4);

    let root = dir.path().join("store");
    lde(&[
        "split",
        p(&table),
        "--target",
        "label",
        "--k",
        "4",
        "--root",
        p(&root),
    ]);
    let store = lde_core::Store::open(&root).unwrap();
    assert_eq!(store.count(lde_core::ArtifactKind::DatasetParams), 4);
    assert_eq!(store.datasets()[0].meta_features.n_classes, Some(3));
}
