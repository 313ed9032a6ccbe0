use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{iteration_confidence, ScenarioSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub nu: f64,
    pub kappa: f64,
    pub n_outputs: usize,
    pub t: u64,
    pub kappa_t: f64,
    pub scenarios: u64,
}

/// `m_t` over the full grid `nus x kappas x outputs x ts`, in that nesting order.
pub fn scaling_study(nus: &[f64], kappas: &[f64], outputs: &[usize], ts: &[u64]) -> Result<Vec<ScalingRow>> {
    let mut rows = Vec::with_capacity(nus.len() * kappas.len() * outputs.len() * ts.len());
    for &nu in nus {
        for &kappa in kappas {
            for &n_outputs in outputs {
                let schedule = ScenarioSchedule::new(nu, kappa, n_outputs)?;
                for &t in ts {
                    rows.push(ScalingRow {
                        nu,
                        kappa,
                        n_outputs,
                        t,
                        kappa_t: iteration_confidence(kappa, t)?,
                        scenarios: schedule.scenarios_at(t)?,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn scaling_csv(rows: &[ScalingRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["nu", "kappa", "n_outputs", "t", "kappa_t", "m_t"])?;
    for r in rows {
        w.write_record([
            r.nu.to_string(),
            r.kappa.to_string(),
            r.n_outputs.to_string(),
            r.t.to_string(),
            r.kappa_t.to_string(),
            r.scenarios.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
