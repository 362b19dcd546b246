use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::creativity::CreativityReport;
use super::suite::{EvalReport, EVAL_SCHEMA};
use crate::error::Result;

/// One evaluation result as persisted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema: u32,
    pub label: String,
    pub eval: Option<EvalReport>,
    pub creativity: Option<CreativityReport>,
    /// pass@1 from perturbed starts.
    pub perturbation: Option<f64>,
}

impl MetricsRecord {
    pub fn new(label: impl Into<String>) -> Self {
        Self { schema: EVAL_SCHEMA, label: label.into(), eval: None, creativity: None, perturbation: None }
    }

    /// Curve rows `(metric, k, value)` in a fixed order.
    pub fn curve_rows(&self) -> Vec<(&'static str, usize, f64)> {
        let mut rows = Vec::new();
        if let Some(e) = &self.eval {
            rows.extend(e.k_grid.iter().zip(&e.pass_at_k).map(|(&k, &v)| ("pass_at_k", k, v)));
        }
        if let Some(c) = &self.creativity {
            for (name, vals) in [
                ("diff_at_k", &c.diff_at_k),
                ("validity_pass_at_k", &c.validity_pass_at_k),
                ("creativity_pass_at_k", &c.creativity_pass_at_k),
            ] {
                rows.extend(c.k_grid.iter().zip(vals).map(|(&k, &v)| (name, k, v)));
            }
        }
        rows
    }
}

pub const CSV_HEADER: &str = "schema,label,metric,k,value";

/// Append `record` as one JSON line to `jsonl` and its curves to `csv`
/// (header written when the file is new).
pub fn emit_metrics(record: &MetricsRecord, jsonl: &Path, csv: &Path) -> Result<()> {
    let mut j = OpenOptions::new().create(true).append(true).open(jsonl)?;
    writeln!(j, "{}", serde_json::to_string(record)?)?;
    let fresh = !csv.exists() || std::fs::metadata(csv)?.len() == 0;
    let mut c = OpenOptions::new().create(true).append(true).open(csv)?;
    if fresh {
        writeln!(c, "{CSV_HEADER}")?;
    }
    for (metric, k, v) in record.curve_rows() {
        writeln!(c, "{},{},{metric},{k},{v}", record.schema, record.label)?;
    }
    Ok(())
}

pub fn read_metrics_records(jsonl: &Path) -> Result<Vec<MetricsRecord>> {
    BufReader::new(File::open(jsonl)?)
        .lines()
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}
