mod common;

use std::path::Path;

use qimpute::cli::main_with_args;

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["qimpute"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn impute_writes_six_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let data = common::data_path();
    assert_eq!(
        run(&[
            "impute",
            "--input",
            s(&data),
            "--output",
            s(&out),
            "--seed",
            "42"
        ]),
        0
    );
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "diabetes_imputed.csv",
            "diabetes_imputed_angle1.csv",
            "diabetes_imputed_angle2.csv",
            "diabetes_imputed_angle3.csv",
            "manifest.json",
            "stats.csv"
        ]
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(out.join(a.as_str().unwrap()).exists());
    }
    assert_eq!(manifest["master_seed"], 42);
    assert_eq!(manifest["config"]["reference"], "imputed");
}

#[test]
fn missing_seed_is_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = common::data_path();
    let out = tmp.path().join("o");
    assert_eq!(
        run(&["impute", "--input", s(&data), "--output", s(&out)]),
        1
    );
    assert!(!out.exists());
}

#[test]
fn bad_config_is_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\n[penalty]\nclosenes_fraction = 0.1\n").unwrap();
    let data = common::data_path();
    let out = tmp.path().join("o");
    assert_eq!(
        run(&[
            "impute",
            "--config",
            s(&cfg),
            "--input",
            s(&data),
            "--output",
            s(&out)
        ]),
        1
    );
}

#[test]
fn unwritable_output_is_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let data = common::data_path();
    assert_eq!(
        run(&[
            "impute",
            "--input",
            s(&data),
            "--output",
            s(&out),
            "--seed",
            "1"
        ]),
        2
    );
}

#[test]
fn missing_input_is_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let missing = tmp.path().join("nope.csv");
    assert_eq!(
        run(&[
            "impute",
            "--input",
            s(&missing),
            "--output",
            s(&out),
            "--seed",
            "1"
        ]),
        2
    );
}

#[test]
fn tiny_budget_is_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\n[optimizer]\nmethod = \"simulated_annealing\"\nbudget = 2\n[optimizer.de]\npopulation = 4\n").unwrap();
    let data = common::data_path();
    let out = tmp.path().join("o");
    assert_eq!(
        run(&[
            "impute",
            "--config",
            s(&cfg),
            "--input",
            s(&data),
            "--output",
            s(&out)
        ]),
        3
    );
    assert!(!out.exists());
}

fn read_table(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn benchmark_layout_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = common::data_path();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(
            run(&[
                "benchmark",
                "--input",
                s(&data),
                "--output",
                s(out),
                "--seed",
                "8"
            ]),
            0
        );
    }
    let w = read_table(&a.join("wasserstein.csv"));
    assert_eq!(w.len(), 7);
    assert_eq!(w[0].len(), 14);
    assert_eq!(
        &w[0][1..],
        [
            "Mean",
            "Median",
            "Mode",
            "KNN",
            "DE_1",
            "DE_2",
            "DE_3",
            "COBYLA_1",
            "COBYLA_2",
            "COBYLA_3",
            "Annealing_1",
            "Annealing_2",
            "Annealing_3"
        ]
    );
    let ks = read_table(&a.join("ks.csv"));
    for row in &ks[1..] {
        assert_eq!(row[1], "1");
    }
    for name in [
        "ks.csv",
        "wasserstein.csv",
        "sd.csv",
        "variance.csv",
        "kde_Insulin_DE_1.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn evaluate_compares_saved_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let data = common::data_path();
    let out = tmp.path().join("imp");
    assert_eq!(
        run(&[
            "impute",
            "--input",
            s(&data),
            "--output",
            s(&out),
            "--seed",
            "3"
        ]),
        0
    );
    let ev = tmp.path().join("ev");
    let a1 = format!("A1={}", s(&out.join("diabetes_imputed_angle1.csv")));
    let same = format!("Raw={}", s(&data));
    assert_eq!(
        run(&[
            "evaluate",
            "--input",
            s(&data),
            "--output",
            s(&ev),
            "--dataset",
            &a1,
            "--dataset",
            &same
        ]),
        0
    );
    let ks = read_table(&ev.join("ks.csv"));
    assert_eq!(ks[0], ["feature", "A1", "Raw"]);
    assert!(ks[1..].iter().all(|r| r[2] == "1"));
}

#[test]
fn oracle_regenerates_committed_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fx");
    assert_eq!(
        run(&[
            "oracle",
            "--input",
            s(&common::data_path()),
            "--output",
            s(&out)
        ]),
        0
    );
    for name in [
        "mask_counts.json",
        "rotation.json",
        "knn.json",
        "optimizer_toy.json",
    ] {
        let fresh = std::fs::read(out.join(name)).unwrap();
        let committed = std::fs::read(common::fixture(&format!("derived/{name}"))).unwrap();
        assert_eq!(fresh, committed, "{name}");
    }
}
