use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlknock::rng::rng_from_seed;
use mlknock_cli::{ingest_csv, IngestOptions};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlknock"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn options() -> IngestOptions {
    IngestOptions {
        cluster_col: "cluster".into(),
        response_col: "y".into(),
        level2_cols: None,
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

// 40 clusters of 5; y depends strongly on x1 only (plus `signal` on z1).
fn clustered_csv(dir: &Path, name: &str, seed: u64, signal: f64) -> PathBuf {
    let mut rng = rng_from_seed(seed);
    let mut text = String::from("cluster,y,x1,x2,x3,x4,z1,z2\n");
    for j in 0..40 {
        let z1: f64 = rng.sample(StandardNormal);
        let z2 = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let u: f64 = rng.sample(StandardNormal);
        for _ in 0..5 {
            let x: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let e: f64 = rng.sample(StandardNormal);
            let y = signal * (3.0 * x[0] + 1.5 * z1 + u) + e;
            text.push_str(&format!(
                "g{j},{y},{},{},{},{},{z1},{z2}\n",
                x[0], x[1], x[2], x[3]
            ));
        }
    }
    write(dir, name, &text)
}

#[test]
fn toy_dataset_has_two_clusters_of_three() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "toy.csv",
        "cluster,y,x,z\n1,0.5,1.0,3\n2,1.5,2.0,4\n1,2.5,0.0,3\n2,0.1,1.0,4\n1,1.0,5.0,3\n2,2.0,2.5,4\n",
    );
    let ing = ingest_csv(&p, &options()).unwrap();
    assert_eq!(ing.cluster_labels, vec!["1", "2"]);
    assert_eq!(ing.cluster_sizes(), vec![3, 3]);
    assert_eq!(ing.data.x_level1().names(), ["x"]);
    assert_eq!(ing.data.z_level2().names(), ["z"]);
    // grouped by cluster, original order kept inside each cluster
    assert_eq!(ing.data.cluster_id(), [0, 0, 0, 1, 1, 1]);
    assert_eq!(ing.data.y(), [0.5, 2.5, 1.0, 1.5, 0.1, 2.0]);
}

#[test]
fn string_cluster_ids_and_binary_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "s.csv",
        "y,site,b,x\n1,north,1,0.3\n2,south,0,0.1\n3,north,1,0.2\n4,east,1,0.9\n5,south,0,0.4\n",
    );
    let ing = ingest_csv(
        &p,
        &IngestOptions {
            cluster_col: "site".into(),
            ..options()
        },
    )
    .unwrap();
    assert_eq!(ing.cluster_labels, vec!["north", "south", "east"]);
    assert_eq!(ing.cluster_sizes(), vec![2, 2, 1]);
    assert_eq!(ing.binary_columns, vec!["b"]);
    assert_eq!(ing.data.z_level2().names(), ["b"]);
}

#[test]
fn missing_and_non_numeric_cells_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "na.csv",
        "cluster,y,x\n1,0.5,1\n1,NA,2\n2,1,3\n",
    );
    let err = ingest_csv(&p, &options()).unwrap_err().to_string();
    assert!(
        err.contains("missing value at row 2") && err.contains("`y`"),
        "{err}"
    );
    let p = write(dir.path(), "empty.csv", "cluster,y,x\n1,0.5,1\n1,1,\n");
    let err = ingest_csv(&p, &options()).unwrap_err().to_string();
    assert!(err.contains("row 2") && err.contains("`x`"), "{err}");
    let p = write(dir.path(), "text.csv", "cluster,y,x\n1,0.5,abc\n");
    let err = ingest_csv(&p, &options()).unwrap_err().to_string();
    assert!(
        err.contains("non-numeric value `abc`") && err.contains("`x`"),
        "{err}"
    );

    let out = run(&["validate", "--input", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("abc"));
}

#[test]
fn declared_level2_column_varying_within_a_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "v.csv",
        "cluster,y,x,z\n3,1,0.1,7\n3,2,0.2,7\n4,3,0.3,1\n4,4,0.4,2\n",
    );
    let opts = IngestOptions {
        level2_cols: Some(vec!["z".into()]),
        ..options()
    };
    let err = ingest_csv(&p, &opts).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("`z`") && msg.contains("cluster 4"), "{msg}");

    // undeclared, z is detected as level 1
    let ing = ingest_csv(&p, &options()).unwrap();
    assert_eq!(ing.data.x_level1().names(), ["x", "z"]);

    let unknown = IngestOptions {
        level2_cols: Some(vec!["w".into()]),
        ..options()
    };
    assert!(ingest_csv(&p, &unknown)
        .unwrap_err()
        .to_string()
        .contains("`w`"));
    let response = IngestOptions {
        level2_cols: Some(vec!["y".into()]),
        ..options()
    };
    assert!(ingest_csv(&p, &response).is_err());
}

#[test]
fn header_problems() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "cluster,y,x,x\n1,1,1,1\n");
    assert!(ingest_csv(&p, &options())
        .unwrap_err()
        .to_string()
        .contains("duplicate"));
    let p = write(dir.path(), "r.csv", "cluster,resp,x\n1,1,1\n");
    assert!(ingest_csv(&p, &options())
        .unwrap_err()
        .to_string()
        .contains("`y`"));
    let p = write(dir.path(), "e.csv", "cluster,y,x\n");
    assert!(ingest_csv(&p, &options()).is_err());
    assert!(ingest_csv(&dir.path().join("absent.csv"), &options()).is_err());
}

#[test]
fn dominant_level1_signal_is_selected() {
    let dir = tempfile::tempdir().unwrap();
    let data = clustered_csv(dir.path(), "d.csv", 3, 1.0);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "select",
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--method",
        "sequential",
        "--pfer",
        "1",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let selected: Vec<&str> = report["selected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(selected.contains(&"x1_within"), "{selected:?}");
    let features = report["features"].as_array().unwrap();
    assert_eq!(features.len(), 4 + 4 + 2);
    for key in [
        "feature",
        "level",
        "selected",
        "w_statistic",
        "frequency",
        "threshold",
    ] {
        assert!(features[0].get(key).is_some(), "{key}");
    }
    let csv = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(csv.starts_with("feature,level,selected,w_statistic,frequency,threshold\n"));
    assert_eq!(csv.lines().count(), 11);
    assert!(String::from_utf8_lossy(&out.stdout).contains("x1_within"));
}

#[test]
fn lasso_on_null_data_selects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = clustered_csv(dir.path(), "null.csv", 4, 0.0);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "select",
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--method",
        "lasso",
        "--lambda-rule",
        "one_se",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["selected"].as_array().unwrap().len(), 0);
}

#[test]
fn select_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let data = clustered_csv(dir.path(), "d.csv", 6, 1.0);
    let go = |name: &str, extra: &[&str]| {
        let out_dir = dir.path().join(name);
        let mut args = vec![
            "select",
            "--input",
            data.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--method",
            "derandomized",
            "--runs",
            "7",
            "--seed",
            "11",
        ];
        args.extend(extra);
        let out = run(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        (
            fs::read(out_dir.join("report.json")).unwrap(),
            fs::read(out_dir.join("summary.csv")).unwrap(),
            out.stdout,
        )
    };
    let a = go("a", &[]);
    assert_eq!(a, go("b", &[]));
    assert_eq!(a, go("c", &["--parallel"]));
    assert_ne!(a.0, go("d", &["--fdr", "0.2"]).0);
}

#[test]
fn overall_selection_covers_every_column() {
    let dir = tempfile::tempdir().unwrap();
    let data = clustered_csv(dir.path(), "d.csv", 7, 1.0);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "select",
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--method",
        "derandomized",
        "--runs",
        "3",
        "--overall",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "overall");
    assert_eq!(report["budgets"]["overall"]["value"], 2.0);
    let features = report["features"].as_array().unwrap();
    assert_eq!(features.len(), 10);
    assert_eq!(features[0]["level"], "level1");
    assert_eq!(features[4]["level"], "level2");
}

#[test]
fn knockoff_dump_lists_originals_then_knockoffs() {
    let dir = tempfile::tempdir().unwrap();
    let data = clustered_csv(dir.path(), "d.csv", 8, 1.0);
    let out_dir = dir.path().join("ko");
    let out = run(&[
        "knockoffs",
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--method",
        "derandomized",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let l1 = fs::read_to_string(out_dir.join("level1_knockoffs.csv")).unwrap();
    let header = l1.lines().next().unwrap();
    assert_eq!(
        header,
        "cluster,x1_within,x2_within,x3_within,x4_within,x1_within_knockoff,x2_within_knockoff,\
         x3_within_knockoff,x4_within_knockoff"
    );
    assert_eq!(l1.lines().count(), 201);
    let l2 = fs::read_to_string(out_dir.join("level2_knockoffs.csv")).unwrap();
    assert!(l2.starts_with("cluster,weight,x1_mean"));
    assert_eq!(l2.lines().count(), 41);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["method"], "gaussian");

    let out = run(&[
        "knockoffs",
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--method",
        "lasso",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_reports_pass_and_rank_deficiency() {
    let dir = tempfile::tempdir().unwrap();
    let data = clustered_csv(dir.path(), "d.csv", 9, 1.0);
    let out_dir = dir.path().join("v");
    let out = run(&[
        "validate",
        "--input",
        data.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("PASS").count(), 2, "{stdout}");
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);

    // two clusters cannot identify an intercept and two level-2 columns
    let small = write(
        dir.path(),
        "small.csv",
        "cluster,y,x,z\n1,1,0.1,5\n1,2,0.4,5\n2,3,0.3,6\n2,5,0.9,6\n",
    );
    let out = run(&["validate", "--input", small.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

fn small_sim_config(dir: &Path) -> PathBuf {
    write(
        dir,
        "sim.json",
        r#"{"j": 30, "k": 4, "h": 4, "dichotomize_idx": [1],
            "coefficients": {"beta_w_1": 1.0, "beta_b_2": 1.0, "delta_3": 1.0}}"#,
    )
}

#[test]
fn simulate_is_deterministic_serial_and_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sim_config(dir.path());
    let go = |name: &str, extra: &[&str]| {
        let out_dir = dir.path().join(name);
        let mut args = vec![
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--reps",
            "2",
            "--seed",
            "7",
            "--runs",
            "3",
        ];
        args.extend(extra);
        let out = run(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        (
            fs::read(out_dir.join("report.json")).unwrap(),
            fs::read(out_dir.join("summary.csv")).unwrap(),
        )
    };
    let a = go("a", &[]);
    assert_eq!(a, go("b", &[]));
    assert_eq!(a, go("c", &["--parallel"]));
    let report: Value = serde_json::from_slice(&a.0).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(
        report["report"]["replications"].as_array().unwrap().len(),
        2
    );
    let csv = String::from_utf8(a.1).unwrap();
    assert!(csv.starts_with("method,alpha,lambda_rule,mode,budget,reps,pfer_hat,fdr_hat,tpr_hat\n"));
    assert_eq!(csv.lines().count(), 1 + 16 + 2 * 7);
}

#[test]
fn simulate_method_subset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sim_config(dir.path());
    let out_dir = dir.path().join("s");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
        "--reps",
        "1",
        "--runs",
        "3",
        "--methods",
        "sequential",
        "--pfer",
        "1",
        "--no-overall",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("sequential,")));
    assert!(String::from_utf8_lossy(&out.stdout).contains("level1"));
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("s");
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"coefficients": {"beta_q_1": 1.0}}"#,
    );
    let out = run(&[
        "simulate",
        "--config",
        bad.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("beta_q_1"));

    let unknown = write(dir.path(), "unknown.json", r#"{"clusters": 10}"#);
    let out = run(&[
        "simulate",
        "--config",
        unknown.to_str().unwrap(),
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "simulate",
        "--output",
        out_dir.to_str().unwrap(),
        "--methods",
        "ridge",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate",
        "--output",
        out_dir.to_str().unwrap(),
        "--pfer",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
