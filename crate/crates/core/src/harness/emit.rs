use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{ExperimentResult, GroundTruth, ModeAggregate, RunSummary, RunTrace};
use crate::error::Result;

pub const SUMMARY_FILE: &str = "summary.json";

pub fn trace_file_name(trace: &RunTrace) -> String {
    format!("trace_{}_seed{}.csv", trace.beta_mode.label(), trace.seed)
}

pub fn trace_header(dim: usize, n_outputs: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..dim).map(|j| format!("a_{j}")));
    h.extend((0..n_outputs).map(|i| format!("y_{i}")));
    h.extend((0..n_outputs).map(|i| format!("eps_bar_{i}")));
    h.push("m_t".into());
    h.extend((0..n_outputs).map(|i| format!("beta_{i}")));
    for c in ["safe_set_size", "max_width", "best_lower", "violation"] {
        h.push(c.into());
    }
    h
}

/// Writes one trace as CSV. Missing scenario bounds are left blank.
pub fn write_trace_csv<W: std::io::Write>(trace: &RunTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace.dim, trace.n_outputs))?;
    for r in &trace.rows {
        let mut rec = vec![r.t.to_string()];
        rec.extend(r.point.iter().map(f64::to_string));
        rec.extend(r.y.iter().map(f64::to_string));
        match &r.eps_bar {
            Some(e) => rec.extend(e.iter().map(f64::to_string)),
            None => rec.extend((0..trace.n_outputs).map(|_| String::new())),
        }
        rec.push(r.scenarios.to_string());
        rec.extend(r.beta.iter().map(f64::to_string));
        rec.push(r.safe_set_size.to_string());
        rec.push(r.max_width.to_string());
        rec.push(r.best_lower.to_string());
        rec.push(u8::from(r.violation).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunEntry<'a> {
    trace_file: String,
    summary: &'a RunSummary,
    truth: &'a GroundTruth,
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    config: &'a ExperimentConfig,
    aggregate: &'a [ModeAggregate],
    runs: Vec<RunEntry<'a>>,
}

pub fn summary_json(result: &ExperimentResult) -> Result<String> {
    let doc = SummaryDocument {
        config: &result.config,
        aggregate: &result.aggregate,
        runs: result
            .runs
            .iter()
            .map(|r| RunEntry {
                trace_file: trace_file_name(&r.trace),
                summary: &r.summary,
                truth: &r.truth,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Writes every trace CSV plus `summary.json` into `dir`, returning the paths.
pub fn write_experiment(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(result.runs.len() + 1);
    for run in &result.runs {
        let path = dir.join(trace_file_name(&run.trace));
        write_trace_csv(&run.trace, fs::File::create(&path)?)?;
        written.push(path);
    }
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, summary_json(result)?)?;
    written.push(path);
    Ok(written)
}
