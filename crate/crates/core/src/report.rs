//! The risk-report table shared between the library and the CLI, and its
//! canonical CSV encoding.
//!
//! CSV format: UTF-8, `.` decimal separator, `\n` line endings, floats with
//! 17 significant digits (lossless for f64), empty fields for absent values.

use crate::{Error, Result};

/// One table row: a grid value, a method label, and the theory/Monte-Carlo
/// risk columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub grid: f64,
    pub method: String,
    pub risk_theory: Option<f64>,
    pub risk_mc_mean: Option<f64>,
    pub risk_mc_stderr: Option<f64>,
    pub trials: u64,
}

/// Run provenance recorded next to the table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// A full report: rows plus optional manifest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RiskReport {
    pub rows: Vec<ReportRow>,
    pub manifest: Option<Manifest>,
}

pub const CSV_HEADER: &str = "grid,method,risk_theory,risk_mc_mean,risk_mc_stderr,trials";

/// 17-significant-digit float rendering; round-trips every finite f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn parse_opt(field: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| Error::InvalidArgument(format!("bad float {field:?}: {e}")))
}

impl RiskReport {
    pub fn from_rows(rows: Vec<ReportRow>) -> Self {
        Self { rows, manifest: None }
    }

    /// Canonical CSV encoding of the rows (manifest is written separately).
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format_float(row.grid));
            out.push(',');
            out.push_str(&row.method);
            out.push(',');
            out.push_str(&format_opt(row.risk_theory));
            out.push(',');
            out.push_str(&format_opt(row.risk_mc_mean));
            out.push(',');
            out.push_str(&format_opt(row.risk_mc_stderr));
            out.push(',');
            out.push_str(&row.trials.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses a CSV string produced by [`RiskReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "bad CSV header: {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::InvalidArgument(format!(
                    "expected 6 fields, got {} in {line:?}",
                    fields.len()
                )));
            }
            rows.push(ReportRow {
                grid: fields[0]
                    .parse()
                    .map_err(|e| Error::InvalidArgument(format!("bad grid: {e}")))?,
                method: fields[1].to_string(),
                risk_theory: parse_opt(fields[2])?,
                risk_mc_mean: parse_opt(fields[3])?,
                risk_mc_stderr: parse_opt(fields[4])?,
                trials: fields[5]
                    .parse()
                    .map_err(|e| Error::InvalidArgument(format!("bad trials: {e}")))?,
            });
        }
        Ok(Self::from_rows(rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [
            2.5,
            -1.0 / 3.0,
            1e-300,
            6.02e23,
            f64::MIN_POSITIVE,
            0.1 + 0.2,
            -0.0,
        ] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let report = RiskReport::from_rows(vec![
            ReportRow {
                grid: 400.0,
                method: "dense".into(),
                risk_theory: Some(2.5),
                risk_mc_mean: Some(2.4987),
                risk_mc_stderr: Some(0.013),
                trials: 200,
            },
            ReportRow {
                grid: 120.0,
                method: "hessian".into(),
                risk_theory: None,
                risk_mc_mean: None,
                risk_mc_stderr: None,
                trials: 0,
            },
        ]);
        let csv = report.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert!(!csv.contains('\r'));
        let parsed = RiskReport::from_csv(&csv).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(RiskReport::from_csv("nope\n").is_err());
        let bad = format!("{CSV_HEADER}\n1.0,dense,x,,,2\n");
        assert!(RiskReport::from_csv(&bad).is_err());
    }
}
