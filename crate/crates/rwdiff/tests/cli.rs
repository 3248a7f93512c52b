use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rwdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwdiff"))
        .args(args)
        .env("RWDIFF_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(rwdiff(&["--help"]).status.code(), Some(0));
    assert_eq!(rwdiff(&["--version"]).status.code(), Some(0));
    assert_eq!(rwdiff(&[]).status.code(), Some(1));
    assert_eq!(rwdiff(&["simulate", "--model", "sinh"]).status.code(), Some(1));
    assert_eq!(rwdiff(&["classify", "--model", "power", "--params", "x"]).status.code(), Some(1));
}

#[test]
fn catalog_lists_every_family() {
    let v = stdout_json(&rwdiff(&["catalog"]));
    let names: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row["model"]["family"].as_str().unwrap())
        .collect();
    for family in ["constant", "exponential", "power", "power_exp", "sinh", "big_crunch_radiation"] {
        assert!(names.contains(&family), "{family} missing from {names:?}");
    }
}

#[test]
fn classify_reports_regimes() {
    let v = stdout_json(&rwdiff(&["classify", "--model", "exponential", "--params", "1", "--fiber", "r3"]));
    assert_eq!(v["clock_convergent"], Value::Bool(false));
    assert_eq!(v["lifetime_finite"], Value::Bool(false));
    let crunch = stdout_json(&rwdiff(&["classify", "--model", "big_crunch_radiation", "--fiber", "s3"]));
    assert_eq!(crunch["lifetime_finite"], Value::Bool(true));
}

#[test]
fn classify_accepts_a_model_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("m.kv");
    fs::write(&path, "family = power\nparams = 2/3\n").unwrap();
    let from_file = stdout_json(&rwdiff(&["classify", "--model-file", path.to_str().unwrap()]));
    let from_flags = stdout_json(&rwdiff(&["classify", "--model", "power", "--params", "2/3"]));
    assert_eq!(from_file, from_flags);
}

#[test]
fn simulate_writes_csv_and_sidecar_then_plot_data() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("traj.csv");
    let out = rwdiff(&[
        "simulate", "--model", "constant", "--fiber", "s3", "--s-max", "2", "--seed", "7", "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("s,t,tdot,a,clock,conformal,x0,"), "{header}");
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("traj.csv.json")).unwrap()).unwrap();
    assert_eq!(sidecar["fiber"], "s3");
    assert_eq!(sidecar["seed"], 7);

    let again = dir.path().join("again.csv");
    rwdiff(&[
        "simulate", "--model", "constant", "--fiber", "s3", "--s-max", "2", "--seed", "7", "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&again).unwrap());

    let plots = dir.path().join("plots");
    let out = rwdiff(&["plot-data", "--input", csv.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for stem in ["log_tdot", "clock", "theta_vs_clock", "great_circle_residual"] {
        assert!(plots.join(format!("{stem}.csv")).exists(), "{stem}.csv");
        let svg = fs::read_to_string(plots.join(format!("{stem}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"), "{stem}.svg");
    }
}

#[test]
fn ensemble_output_is_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.family = power\nmodel.params = 2/3\nfiber = h3\nensemble.n_traj = 6\n\
         ensemble.s_max = 5\nensemble.seed = 3\n",
    );
    let run = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_rwdiff"))
            .args(["ensemble", "--config", &cfg, "--out", out.to_str().unwrap()])
            .env("RWDIFF_WORKERS", workers)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(out).unwrap()
    };
    let one = run("1", "a.json");
    assert_eq!(one, run("3", "b.json"));
    let v: Value = serde_json::from_slice(&one).unwrap();
    assert_eq!(v["n_traj"], 6);
}

#[test]
fn ensemble_raw_csv_and_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "model.family = sinh\nfiber = r3\nensemble.s_max = 50\n");
    let raw = dir.path().join("raw");
    let out = rwdiff(&[
        "ensemble", "--config", &cfg, "--n-traj", "3", "--s-max", "2", "--raw-csv", raw.to_str().unwrap(),
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["n_traj"], 3);
    assert_eq!(v["config"]["s_max"], 2.0);
    for i in 0..3 {
        assert!(raw.join(format!("traj_{i:04}.csv")).exists());
    }
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.family = exponential\nmodel.params = 1\nfiber = r3\nensemble.n_traj = 8\n\
         ensemble.s_max = 60\nstatistics = occupation, time_average, clock, rates, returns, boundary\n",
    );
    let out = rwdiff(&["verify", "--config", &cfg]);
    let code = out.status.code();
    let v: Value = serde_json::from_slice(&out.stdout).expect("JSON on stdout");
    let verdict = &v["regime_verdict"];
    assert!(verdict["claims"].as_array().unwrap().len() == 5);
    let failed = verdict["failed"].as_u64().unwrap();
    assert_eq!(code, Some(if failed == 0 { 0 } else { 3 }));

    let missing = write_config(dir.path(), "model.family = sinh\nfiber = r3\nensemble.n_traj = 2\nensemble.s_max = 2\nstatistics = rates\n");
    assert_eq!(rwdiff(&["verify", "--config", &missing]).status.code(), Some(1));
}
