use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_onebit-doa"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
name = "cli-small"
geometry = [0, 1, 4, 6]
k = 2
snr_db = 5.0
trials = 6
seed = 9
estimators = ["eocab", "ocab", "icab"]
overlays = ["crb_w", "thm6_mse"]
music_grid_deg = 0.05
[sweep]
variable = "n"
values = [80, 160]
"#;

#[test]
fn geometry_reports_coarray() {
    let out = run(&["geometry", "--geometry", "nested"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["d"], 30);
    assert_eq!(v["v"], 30);
    assert_eq!(v["m"], 10);
    let out = run(&["geometry", "--geometry", "0,1,4,6"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["v"], 7);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "geometry = \"nested\"\n[sweep]\nvariable = \"n\"\nvalues = []\n");
    assert_eq!(run(&["simulate", "--config", &bad]).status.code(), Some(2));
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["geometry", "--geometry", "triangle"]).status.code(), Some(2));
    assert_eq!(run(&["bounds", "--geometry", "nested", "--n", "100"]).status.code(), Some(2));
}

#[test]
fn simulate_is_worker_independent_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, w) in [(&a, "1"), (&b, "4")] {
        let o = run(&["simulate", "--config", &cfg, "--workers", w, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(String::from_utf8(ta).unwrap().lines().count(), 1 + 2 * 3 * 2);
    let echo = std::fs::read_to_string(dir.path().join("a.csv.config.toml")).unwrap();
    assert!(echo.contains("seed = 9") && echo.contains("trials = 6"));
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let o = run(&["simulate", "--config", &cfg, "--trials", "3", "--seed", "4", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["trials"], 3);
    assert_eq!(v["config"]["seed"], 4);
    assert_eq!(v["points"][0]["rows"][0]["trials_ok"], 3);
}

#[test]
fn unreliable_points_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // Co-array of {0,1,4,6} has v = 7, so K = 7 cannot be estimated.
    let body = r#"
geometry = [0, 1, 4, 6]
snr_db = 5.0
n = 100
trials = 6
estimators = ["ocab"]
music_grid_deg = 0.05
[sweep]
variable = "k"
values = [2, 7]
"#;
    let cfg = write_config(dir.path(), "kk.toml", body);
    let o = run(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("k,7,ocab,1,,,0,6,")));
}

#[test]
fn bounds_from_flags() {
    let o = run(&["bounds", "--geometry", "nested", "--doas", "-10,20", "--snr-db", "0", "--n", "500"]);
    assert!(o.status.success());
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r[2], "crb");
        let (w, i): (f64, f64) = (r[8].parse().unwrap(), r[9].parse().unwrap());
        assert!(w > i && i > 0.0);
    }
}

#[test]
fn analyze_pair_reports_resolution_bound() {
    let o = run(&["analyze", "--geometry", "nested", "--doas", "19,21", "--snr-db", "0", "--n", "500", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["points"][0]["rows"].as_array().unwrap();
    let eocab: Vec<_> = rows.iter().filter(|r| r["estimator"] == "eocab").collect();
    assert_eq!(eocab.len(), 2);
    let b = eocab[0]["resolution_bound"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&b));
    assert!(eocab[0]["mse_thm6_deg"].as_f64().unwrap() > 0.0);
}
