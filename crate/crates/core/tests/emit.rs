use std::fs;

use scenopt::harness::emit::{trace_header, SUMMARY_FILE};
use scenopt::harness::{beta_bar_from_trace, preset, run_experiment, write_experiment, write_trace_csv, RunTrace};
use scenopt::BetaMode;

fn small() -> scenopt::harness::ExperimentConfig {
    let mut c = preset("paper-synthetic-1").unwrap();
    c.seeds = vec![4, 9];
    c.max_iterations = 25;
    c
}

#[test]
fn empty_trace_is_header_only() {
    let trace = RunTrace {
        seed: 0,
        beta_mode: BetaMode::Scenario,
        dim: 2,
        n_outputs: 2,
        rows: vec![],
    };
    let mut buf = Vec::new();
    write_trace_csv(&trace, &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "t,a_0,a_1,y_0,y_1,eps_bar_0,eps_bar_1,m_t,beta_0,beta_1,safe_set_size,max_width,best_lower,violation\n"
    );
}

#[test]
fn file_layout_and_columns() {
    let c = small();
    let result = run_experiment(&c, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_experiment(&result, dir.path()).unwrap();
    assert_eq!(files.len(), 2 * 2 + 1);
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "summary.json",
            "trace_classic_seed4.csv",
            "trace_classic_seed9.csv",
            "trace_scenario_seed4.csv",
            "trace_scenario_seed9.csv"
        ]
    );

    let run = &result.runs[0];
    let text = fs::read_to_string(dir.path().join("trace_scenario_seed4.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), trace_header(1, 1).join(","));
    assert_eq!(lines.count(), run.trace.rows.len());
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[4], "71");
    assert_eq!(first.len(), 10);
    assert!(first[9] == "0" || first[9] == "1");

    let series = beta_bar_from_trace(text.as_bytes()).unwrap();
    assert_eq!(series, run.summary.beta_bar);

    let classic = fs::read_to_string(dir.path().join("trace_classic_seed4.csv")).unwrap();
    let row: Vec<&str> = classic.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[3], row[4]), ("", "0"));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 4);
    assert_eq!(summary["config"]["name"], "paper-synthetic-1");
    assert_eq!(summary["aggregate"].as_array().unwrap().len(), 2);
    assert!(summary["runs"][0]["truth"]["functions"][0]["coefficients"].is_array());
}

#[test]
fn reruns_are_byte_identical() {
    let c = small();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_experiment(&run_experiment(&c, 4).unwrap(), a.path()).unwrap();
    write_experiment(&run_experiment(&c, 1).unwrap(), b.path()).unwrap();
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap()
        );
    }
}
