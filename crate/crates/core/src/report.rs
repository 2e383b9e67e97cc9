//! Run reports: a JSON envelope plus CSV series for plotting.
//!
//! Reports carry no timestamps or timings, so a fixed configuration and
//! seed produce byte-identical output.

use crate::error::{Error, Result};
use crate::example_r6::ExampleSeries;
use crate::newton::NewtonReport;
use crate::scalar::Scalar;
use serde::Serialize;

pub const TOOL: &str = "pseudodisc";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The iteration ran but did not converge; `result` holds the partial run.
    Diverged,
    Failed,
}

#[derive(Debug, Serialize)]
pub struct Report<'a, Cfg: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a Cfg,
    pub status: Status,
    pub error: Option<String>,
    pub result: Option<R>,
}

impl<'a, Cfg: Serialize, R: Serialize> Report<'a, Cfg, R> {
    pub fn ok(command: &'a str, config: &'a Cfg, result: R) -> Self {
        Self { tool: TOOL, version: VERSION, command, config, status: Status::Ok, error: None, result: Some(result) }
    }

    pub fn failed(command: &'a str, config: &'a Cfg, status: Status, error: String, result: Option<R>) -> Self {
        Self { tool: TOOL, version: VERSION, command, config, status, error: Some(error), result }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn num<S: Scalar>(x: S) -> String {
    format!("{:e}", x.as_f64())
}

/// `iteration,residual,tail` for one Newton run.
pub fn residual_csv<S: Scalar>(rep: &NewtonReport<S>) -> Result<String> {
    csv_string(
        &["iteration", "residual", "tail"],
        rep.residuals.iter().enumerate().map(|(k, r)| {
            vec![k.to_string(), num(*r), rep.tails.get(k).map(|t| num(*t)).unwrap_or_default()]
        }),
    )
}

/// `index,sigma,relative` with singular values largest first.
pub fn spectrum_csv<S: Scalar>(spectrum: &[S]) -> Result<String> {
    let smax = spectrum.first().map(|s| s.as_f64()).unwrap_or(0.0);
    csv_string(
        &["index", "sigma", "relative"],
        spectrum.iter().enumerate().map(|(i, s)| {
            let rel = if smax > 0.0 { s.as_f64() / smax } else { 0.0 };
            vec![i.to_string(), num(*s), format!("{rel:e}")]
        }),
    )
}

/// `k,b_k,b_k_f64,bound` with `b_k` exact and `bound = 3^{−k}`.
pub fn b_table_csv(series: &ExampleSeries) -> Result<String> {
    let f = series.b_f64();
    csv_string(
        &["k", "b_k", "b_k_f64", "bound"],
        series.b.iter().enumerate().map(|(k, b)| {
            vec![k.to_string(), b.to_string(), format!("{:e}", f[k]), format!("{:e}", 3f64.powi(-(k as i32)))]
        }),
    )
}

/// `name,value,tail_bound` for `λ₁`, `λ₂`.
pub fn lambda_csv(series: &ExampleSeries) -> Result<String> {
    csv_string(
        &["name", "value", "tail_bound"],
        [
            vec!["lambda1".into(), format!("{:e}", series.lambda1), format!("{:e}", series.tail1)],
            vec!["lambda2".into(), format!("{:e}", series.lambda2), format!("{:e}", series.tail2)],
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example_r6::b_coeffs;

    #[test]
    fn envelope_is_stable() {
        let cfg = serde_json::json!({"p": 4.0});
        let a = Report::ok("solve", &cfg, vec![1.0, 2.0]).to_json().unwrap();
        let b = Report::ok("solve", &cfg, vec![1.0, 2.0]).to_json().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"version\": \"") && a.contains("\"status\": \"ok\""));
    }

    #[test]
    fn b_table_rows() {
        let s = b_coeffs(3);
        let t = b_table_csv(&s).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "k,b_k,b_k_f64,bound");
        assert!(lines[1].starts_with("0,1,"));
        assert!(lines[2].starts_with("1,-1,"));
        assert!(lines[3].starts_with("2,1/9,"));
        assert!(lines[4].starts_with("3,1/135,"));
    }

    #[test]
    fn spectrum_relative_column() {
        let t = spectrum_csv(&[2.0f64, 1.0]).unwrap();
        assert_eq!(t.lines().nth(2).unwrap(), "1,1e0,5e-1");
    }
}
