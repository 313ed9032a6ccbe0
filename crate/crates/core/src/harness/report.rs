use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the growth report for `beta_bar_t = max_i beta_{i,t}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaGrowthRow {
    pub t: usize,
    pub beta_bar: f64,
    pub sqrt_t: f64,
    /// `beta_bar_t > beta_bar_1 * sqrt(t)`.
    pub exceeds_sqrt: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaGrowthReport {
    pub rows: Vec<BetaGrowthRow>,
    pub monotone: bool,
    pub exceedances: usize,
}

pub fn beta_growth_report(beta_bar: &[f64]) -> BetaGrowthReport {
    let first = beta_bar.first().copied().unwrap_or(0.0);
    let rows: Vec<BetaGrowthRow> = beta_bar
        .iter()
        .enumerate()
        .map(|(k, &b)| {
            let t = k + 1;
            let sqrt_t = (t as f64).sqrt();
            BetaGrowthRow {
                t,
                beta_bar: b,
                sqrt_t,
                exceeds_sqrt: b > first * sqrt_t,
            }
        })
        .collect();
    BetaGrowthReport {
        monotone: beta_bar.windows(2).all(|w| w[1] >= w[0]),
        exceedances: rows.iter().filter(|r| r.exceeds_sqrt).count(),
        rows,
    }
}

/// Reads `beta_bar_t` back from a trace CSV.
pub fn beta_bar_from_trace<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    let cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("beta_"))
        .map(|(j, _)| j)
        .collect();
    if cols.is_empty() {
        return Err(Error::Config("trace has no beta_ columns".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut bar = f64::NEG_INFINITY;
        for &j in &cols {
            let v: f64 = rec[j]
                .parse()
                .map_err(|_| Error::Config(format!("bad beta value {:?}", &rec[j])))?;
            bar = bar.max(v);
        }
        out.push(bar);
    }
    Ok(out)
}

pub fn report_csv(report: &BetaGrowthReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "beta_bar", "sqrt_t", "exceeds_sqrt"])?;
    for r in &report.rows {
        w.write_record([
            r.t.to_string(),
            r.beta_bar.to_string(),
            r.sqrt_t.to_string(),
            u8::from(r.exceeds_sqrt).to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_superroot_growth() {
        let r = beta_growth_report(&[1.0, 1.2, 2.0, 1.9]);
        assert!(!r.monotone);
        assert_eq!(r.exceedances, 1);
        assert!(r.rows[2].exceeds_sqrt);
        assert!(!r.rows[0].exceeds_sqrt);
    }

    #[test]
    fn parses_trace_columns() {
        let text = "t,a_0,y_0,y_1,eps_bar_0,eps_bar_1,m_t,beta_0,beta_1\n1,0,0,0,,,0,1.5,2.5\n2,0,0,0,,,0,3,1\n";
        assert_eq!(beta_bar_from_trace(text.as_bytes()).unwrap(), vec![2.5, 3.0]);
        assert!(beta_bar_from_trace("t\n1\n".as_bytes()).is_err());
    }
}
