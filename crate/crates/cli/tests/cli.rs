use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odeim-bd")).args(args).env_remove("ODEIM_BD_JOBS").output().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn data_rows(file: &Path) -> Vec<String> {
    fs::read_to_string(file).unwrap().lines().filter(|l| !l.starts_with('#')).skip(1).map(str::to_owned).collect()
}

#[test]
fn solve_field_exact_case() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "field.json");
    let plot = path(&dir, "field.svg");
    let o = run(&["solve-field", "--alpha", "0.3", "--g", "0.3", "--s", "0", "--points", "400", "--out", &out, "--plot", &plot]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["format"], "odeim-bd/field/v1");
    assert!(doc["eta0"].as_f64().unwrap().abs() < 1e-9);
    assert!(fs::read_to_string(&plot).unwrap().contains("<svg"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["solve-field", "--alpha", "1", "--g", "0.1", "--s", "1"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["check", "--suite", "nonsense"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.json");
    fs::write(&cfg, r#"{"alpha": 1.0, "colour": "blue"}"#).unwrap();
    let o = run(&["--config", &cfg, "qscan", "--conformal", "--theta", "0:0:1", "--out", &path(&dir, "q.csv")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_point_scan_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.json");
    fs::write(&cfg, r#"{"alpha": 1.0, "g": 0.1, "conformal": true, "theta": "0:1:5", "shifts": "none"}"#).unwrap();
    let out = path(&dir, "q.csv");
    let o = run(&["--config", &cfg, "qscan", "--theta", "0.5:0.5:1", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(Path::new(&out));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0.5,0.0,"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let o = run(&["--jobs", jobs, "qscan", "--conformal", "--alpha", "1", "--g", "0.1", "--theta", "-0.5:1:4", "--shifts", "qq", "--out", out]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(data_rows(Path::new(&a)).len(), 12);
}

#[test]
fn conformal_checks_pass() {
    for suite in ["wronskian", "zfun", "qq"] {
        let o = run(&["check", "--suite", suite, "--alpha", "1", "--g", "0.1"]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", String::from_utf8_lossy(&o.stdout));
        assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    }
}

#[test]
fn bae_check_on_q_files() {
    let dir = TempDir::new().unwrap();
    let (zeros, q) = (path(&dir, "zeros.csv"), path(&dir, "q.csv"));
    let plot = path(&dir, "zeros.svg");
    let o = run(&[
        "zeros", "--conformal", "--alpha", "1", "--g", "0.1", "--theta", "1:1.5:3", "--which", "plus", "--out", &zeros,
        "--q-out", &q, "--plot", &plot,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(Path::new(&zeros)).len(), 1);
    assert!(fs::read_to_string(&plot).unwrap().contains("<svg"));
    assert_eq!(run(&["check", "--suite", "bae", "--q-file", &q]).status.code(), Some(0));

    let text = fs::read_to_string(&q).unwrap();
    let corrupted: Vec<String> = text
        .lines()
        .map(|line| {
            let mut cols: Vec<String> = line.split(',').map(str::to_owned).collect();
            if cols.len() > 3 && cols[1].parse::<f64>().map_or(false, |im| im > 2.0) {
                let v: f64 = cols[2].parse().unwrap();
                cols[2] = format!("{:?}", v * 1.1);
            }
            cols.join(",")
        })
        .collect();
    let bad = path(&dir, "bad.csv");
    fs::write(&bad, corrupted.join("\n") + "\n").unwrap();
    let o = run(&["check", "--suite", "bae", "--q-file", &bad]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
