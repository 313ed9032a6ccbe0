use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scenopt"));
    c.env("SAFE_BO_LOG", "off");
    c
}

#[test]
fn presets_listing_and_dump() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("paper-synthetic-1") && text.contains("paper-synthetic-2"));
    let out = bin().args(["presets", "paper-synthetic-2"]).output().unwrap();
    let cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg["eta"], 1e-3);
    assert_eq!(bin().args(["presets", "nope"]).status().unwrap().code(), Some(2));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args([
            "run",
            "--preset",
            "paper-synthetic-1",
            "--seed",
            "5",
            "--max-iterations",
            "10",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("trace_scenario_seed5.csv").exists());
    assert!(dir.path().join("trace_classic_seed5.csv").exists());
    assert!(dir.path().join("summary.json").exists());

    let report = bin()
        .arg("beta-report")
        .arg(dir.path().join("trace_scenario_seed5.csv"))
        .output()
        .unwrap();
    assert!(report.status.success());
    assert!(String::from_utf8(report.stdout)
        .unwrap()
        .starts_with("t,beta_bar,sqrt_t,exceeds_sqrt\n"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"spec": 2}"#).unwrap();
    let code = |args: &[&str]| bin().args(args).status().unwrap().code();
    assert_eq!(code(&["--config", cfg.to_str().unwrap(), "run"]), Some(2));
    assert_eq!(code(&["run"]), Some(2));
    assert_eq!(code(&["run", "--preset", "missing"]), Some(2));
    assert_eq!(code(&["scale-study", "--nu", "1.5"]), Some(2));
}

#[test]
fn strict_collapse_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--preset", "paper-synthetic-2", "--strict", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn scale_study_table() {
    let out = bin()
        .args([
            "scale-study",
            "--nu",
            "0.1",
            "--kappa",
            "0.001",
            "--outputs",
            "1,2",
            "--t",
            "1",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].ends_with(",71"));
}
