mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::repo_path;

fn splitnn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitnn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn pima() -> String {
    repo_path("data/pima.toml").to_string_lossy().into_owned()
}

/// Writes a small regression dataset whose rows 0, 3, 6, ... have a gap.
fn regression_fixture(dir: &Path) -> String {
    let mut csv = String::from("a,b,c,y\n");
    for i in 0..90 {
        let a = (i as f64 * 0.37).sin();
        let b = a * 0.9 + (i as f64 * 1.3).cos() * 0.1;
        let c = (i as f64 * 0.11).cos();
        let y = 2.0 * a - c + 5.0;
        if i % 3 == 0 {
            csv.push_str(&format!("{a},NA,{c},{y}\n"));
        } else {
            csv.push_str(&format!("{a},{b},{c},{y}\n"));
        }
    }
    fs::write(dir.join("reg.csv"), csv).unwrap();
    let schema = r#"
name = "reg"
data_file = "reg.csv"
has_header = true
task = "regression"

[[columns]]
name = "a"
role = "numeric"

[[columns]]
name = "b"
role = "numeric"

[[columns]]
name = "c"
role = "numeric"

[[columns]]
name = "y"
role = "label"
"#;
    let path = dir.join("reg.toml");
    fs::write(&path, schema).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn cluster_writes_dendrogram_and_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let o = splitnn(&["cluster", "--schema", &pima()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("N=768 d=8"));
    assert!(stdout(&o).contains("k = 5"));

    let dendrogram = fs::read_to_string(dir.path().join("dendrogram.txt")).unwrap();
    let lines: Vec<&str> = dendrogram.lines().collect();
    assert_eq!(lines.len(), 7);
    for l in &lines {
        let f: Vec<&str> = l.split(' ').collect();
        assert_eq!(f.len(), 3);
        let (a, b): (usize, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        assert!(a < b && b < 15);
        f[2].parse::<f64>().unwrap();
    }
    let clusters = fs::read_to_string(dir.path().join("clusters.txt")).unwrap();
    assert_eq!(clusters.lines().count(), 8);
    assert!(clusters.starts_with("pregnancies 0\n"));

    let config = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(config.contains("epochs = 1000"));
}

#[test]
fn full_threshold_is_one_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let o = splitnn(&["cluster", "--schema", &pima(), "--threshold", "1.0"], dir.path());
    assert!(stdout(&o).contains("k = 1\n"));
    let clusters = fs::read_to_string(dir.path().join("clusters.txt")).unwrap();
    assert!(clusters.lines().all(|l| l.ends_with(" 0")));
}

#[test]
fn missing_schema_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = splitnn(&["cluster", "--schema", "no/such/schema.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/schema.toml"));

    let o = splitnn(&["benchmark", "--schema", &pima(), "--schema", "gone.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gone.toml"));
}

#[test]
fn bad_configuration_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = splitnn(&["cluster", "--schema", &pima(), "--threshold", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = splitnn(&["cluster", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = splitnn(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_data_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = splitnn(
        &["cluster", "--schema", &pima(), "--dataset", "/nonexistent/pima.dat"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn benchmark_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let args = ["benchmark", "--schema", &pima(), "--epochs", "4", "--seed", "3"];
    let o = splitnn(&args, &first);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("vanilla") && table.contains("split"));

    let parallel = dir.path().join("parallel");
    let o = splitnn(&[&args[..], &["--jobs", "3"]].concat(), &parallel);
    assert!(o.status.success());

    let rerun = dir.path().join("rerun");
    let cfg = first.join("config.toml");
    let o = splitnn(&["benchmark", "--config", cfg.to_str().unwrap()], &rerun);
    assert!(o.status.success());

    for file in ["reports.jsonl", "table.txt"] {
        let a = fs::read(first.join(file)).unwrap();
        assert_eq!(
            a,
            fs::read(parallel.join(file)).unwrap(),
            "{file} differs under --jobs 3"
        );
        assert_eq!(a, fs::read(rerun.join(file)).unwrap(), "{file} differs on rerun");
    }
    assert_eq!(fs::read_to_string(first.join("table.txt")).unwrap(), table);

    let o = splitnn(&["report"], &first);
    assert!(o.status.success());
    assert_eq!(stdout(&o), table);
}

#[test]
fn fixed_threshold_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = splitnn(
        &[
            "benchmark",
            "--schema",
            &pima(),
            "--epochs",
            "2",
            "--model",
            "split",
            "--fixed-threshold",
            "0.5",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let reports = fs::read_to_string(dir.path().join("reports.jsonl")).unwrap();
    assert_eq!(reports.lines().count(), 1);
    assert!(reports.contains("\"fixed_threshold\":0.5"));
    assert!(reports.contains("\"inner_loop\":false"));
}

#[test]
fn robustness_prints_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let schema = regression_fixture(dir.path());
    let run = |seed: &str, out: &str| {
        let o = splitnn(
            &["robustness", "--schema", &schema, "--epochs", "20", "--seed", seed],
            &dir.path().join(out),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let a = run("0", "a");
    let b = run("1", "b");
    assert!(a.contains("test rows 30 of 90 (33.3%)"));
    let labels = |t: &str| {
        t.lines()
            .skip(2)
            .map(|l| l.split("  ").next().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(labels(&a), ["vanilla", "split", "split (k=2)"]);
    assert_eq!(labels(&a), labels(&b));
    assert_ne!(a, b);
    assert_eq!(
        fs::read_to_string(dir.path().join("a/reports.jsonl"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn robustness_needs_missing_rows() {
    let dir = tempfile::tempdir().unwrap();
    let schema = regression_fixture(dir.path());
    let csv = fs::read_to_string(dir.path().join("reg.csv")).unwrap();
    let complete: String = csv
        .lines()
        .filter(|l| !l.contains("NA"))
        .map(|l| format!("{l}\n"))
        .collect();
    let full = dir.path().join("full.csv");
    fs::write(&full, complete).unwrap();
    let o = splitnn(
        &["robustness", "--schema", &schema, "--dataset", full.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("test set would be empty"));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = splitnn(&["gradcheck"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("50 networks"));
    assert_eq!(
        fs::read_to_string(dir.path().join("gradcheck.jsonl"))
            .unwrap()
            .lines()
            .count(),
        50
    );
}

#[test]
fn report_refuses_mixed_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let schema = regression_fixture(dir.path());
    let reg = dir.path().join("reg");
    assert!(splitnn(&["robustness", "--schema", &schema, "--epochs", "2"], &reg)
        .status
        .success());
    let cls = dir.path().join("cls");
    assert!(splitnn(
        &["benchmark", "--schema", &pima(), "--epochs", "1", "--model", "vanilla"],
        &cls
    )
    .status
    .success());
    let o = splitnn(
        &[
            "report",
            reg.join("reports.jsonl").to_str().unwrap(),
            cls.join("reports.jsonl").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("different metrics"));
}
