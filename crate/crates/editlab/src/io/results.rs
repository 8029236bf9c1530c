//! Result tables: one CSV row per editing operation.
//!
//! Header: `step,reliability,generalization,locality,drift,manhattan` plus
//! one `frac_above_<tau>` column per configured threshold. Values carry six
//! significant digits; rewriting the same rows gives byte-identical files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::ResultRow;

use super::fmt_sig6;

const RESULTS_HEADER: &str = "# editlab results v1";

/// Write experiment rows as a CSV table.
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    let thresholds: Vec<f64> = rows[0].drift.frac_above.iter().map(|&(t, _)| t).collect();
    for row in rows {
        let row_thresholds: Vec<f64> = row.drift.frac_above.iter().map(|&(t, _)| t).collect();
        if row_thresholds != thresholds {
            return Err(Error::InvalidConfig(
                "result rows disagree on drift thresholds".into(),
            ));
        }
    }

    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    out.push_str("# config: ");
    out.push_str(&rows[0].config_echo);
    out.push('\n');

    out.push_str("step,reliability,generalization,locality,drift,manhattan");
    for tau in &thresholds {
        out.push_str(&format!(",frac_above_{tau}"));
    }
    out.push('\n');

    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            row.step,
            fmt_sig6(row.metrics.reliability),
            fmt_sig6(row.metrics.generalization),
            fmt_sig6(row.metrics.locality),
            fmt_sig6(row.metrics.general_ability_drift),
            fmt_sig6(row.drift.manhattan),
        ));
        for &(_, frac) in &row.drift.frac_above {
            out.push(',');
            out.push_str(&fmt_sig6(frac));
        }
        out.push('\n');
    }

    super::write_atomic(path, out.as_bytes())
}

/// A result table read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResultTable {
    /// Column values by header name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Parse a file written by [`write_results`].
pub fn read_results(path: &Path) -> Result<ResultTable> {
    let label = path.display().to_string();
    let text = super::read_to_string(path)?;
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(|c| c.trim().to_string()).collect()),
            Some(cols) => {
                let values: Vec<f64> = line
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::file_format(&label, line_no, e.to_string()))?;
                if values.len() != cols.len() {
                    return Err(Error::file_format(
                        &label,
                        line_no,
                        format!("row has {} values, expected {}", values.len(), cols.len()),
                    ));
                }
                rows.push(values);
            }
        }
    }
    match columns {
        Some(columns) if !rows.is_empty() => Ok(ResultTable { columns, rows }),
        _ => Err(Error::EmptyRows),
    }
}
