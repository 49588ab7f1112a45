use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowfit::demand::DemandStratum;
use flowfit::io::export_model;
use flowfit::synthetic::{regional_model, RegionalConfig};

fn toy_spec() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/model.toml")
}

fn flowfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowfit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_toy_exits_zero() {
    let out = flowfit(&["validate", path(&toy_spec())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok (8 zones"));
}

#[test]
fn exit_codes_follow_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for f in ["zones.csv", "nodes.csv", "counts.csv", "model.toml"] {
        fs::copy(toy_spec().with_file_name(f), d.join(f)).unwrap();
    }
    let links = fs::read_to_string(toy_spec().with_file_name("links.csv")).unwrap();
    fs::write(d.join("links.csv"), format!("{links}n1-nx,n1,nx,5,1000,0.15,4,\n")).unwrap();
    let out = flowfit(&["validate", path(&d.join("model.toml"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("links.csv:30") && err.contains("nx"), "{err}");

    fs::write(d.join("links.csv"), format!("{links}n1-n3,n1,n3,slow,1000,0.15,4,\n")).unwrap();
    assert_eq!(flowfit(&["validate", path(&d.join("model.toml"))]).status.code(), Some(2));
    assert_eq!(flowfit(&["validate", path(&d.join("absent.toml"))]).status.code(), Some(2));
}

#[test]
fn calibrate_reports_weights_and_is_byte_stable() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = flowfit(&["calibrate", path(&toy_spec()), "--out", path(d.path())]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains("best J") && stdout.contains("mu = 0.70"), "{stdout}");
    }
    for f in ["history.csv", "weights.toml", "result.txt"] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(dirs[1].path().join(f)).unwrap(), "{f}");
    }
    let history = fs::read_to_string(dirs[0].path().join("history.csv")).unwrap();
    assert!(history.starts_with("evaluation,objective,best_objective,pop-pop:mu,pop-pop:beta\n"));

    let eval_dir = tempfile::tempdir().unwrap();
    let weights = dirs[0].path().join("weights.toml");
    let out = flowfit(&["evaluate", path(&toy_spec()), "--weights", path(&weights), "--out", path(eval_dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let scatter = fs::read_to_string(eval_dir.path().join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 29);
    assert!(String::from_utf8_lossy(&out.stdout).contains("share GEH < 5     1.0000"));
}

#[test]
fn assign_and_compare_write_csvs() {
    let d = tempfile::tempdir().unwrap();
    let out = flowfit(&["assign", path(&toy_spec()), "--mode", "iterative", "--out", path(d.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let flows = fs::read_to_string(d.path().join("flows.csv")).unwrap();
    assert!(flows.starts_with("link_id,flow_total,flow_pop-pop\n"));
    assert_eq!(flows.lines().count(), 29);
    let od = fs::read_to_string(d.path().join("od.csv")).unwrap();
    assert_eq!(od.lines().count(), 65);

    let out = flowfit(&["compare", path(&toy_spec()), "--scenario", "bypass", "--out", path(d.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cmp = fs::read_to_string(d.path().join("compare.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 31);
    assert!(cmp.lines().any(|l| l.starts_with("n2-n5,0,") && !l.ends_with(",0")));
    assert_eq!(
        flowfit(&["compare", path(&toy_spec()), "--scenario", "nope", "--out", path(d.path())]).status.code(),
        Some(2)
    );
}

#[test]
fn split_test_writes_seventy_rows() {
    let truth = [DemandStratum::new("pop-jobs", "population", "jobs", 0.9, 0.06)];
    let initial = [DemandStratum::new("pop-jobs", "population", "jobs", 1.5, 0.1)];
    let model = regional_model(&RegionalConfig::default(), &truth, &initial).unwrap();
    let data = tempfile::tempdir().unwrap();
    let spec = export_model(&model, data.path()).unwrap();
    let out_dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &out_dirs {
        let out = flowfit(&[
            "split-test",
            path(&spec),
            "--fractions",
            "0.3..0.9",
            "--seeds",
            "10",
            "--out",
            path(d.path()),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let csv = fs::read_to_string(out_dirs[0].path().join("split.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(csv.lines().next(), Some("fraction,seed,train_geh,test_geh"));
    assert_eq!(rows.len(), 70);
    assert!(rows[0].starts_with("0.3,0,") && rows[69].starts_with("0.9,9,"));
    assert_eq!(csv, fs::read_to_string(out_dirs[1].path().join("split.csv")).unwrap());
}
