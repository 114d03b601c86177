//! Column statistics over result CSVs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, SUMMARY_FILE};

/// One row of `summary.csv`: statistics of one numeric column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub file: String,
    pub column: String,
    /// Number of finite values.
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Summarizes every numeric column of every `*.csv` in `dir`, sorted by
/// file name. Columns holding any non-numeric cell are skipped; NaN cells
/// are ignored.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| p.file_name().is_some_and(|n| n != SUMMARY_FILE))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for path in files {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut reader = csv::Reader::from_path(&path)?;
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        let mut columns: Vec<Option<Vec<f64>>> = vec![Some(Vec::new()); headers.len()];
        for record in reader.records() {
            let record = record?;
            for (col, cell) in columns.iter_mut().zip(record.iter()) {
                if let Some(values) = col {
                    match cell.parse::<f64>() {
                        Ok(v) => values.push(v),
                        Err(_) => *col = None,
                    }
                }
            }
        }
        for (header, col) in headers.into_iter().zip(columns) {
            let Some(values) = col else { continue };
            let finite: Vec<f64> = values.into_iter().filter(|v| v.is_finite()).collect();
            rows.push(stats(&name, header, &finite));
        }
    }
    Ok(rows)
}

fn stats(file: &str, column: String, xs: &[f64]) -> SummaryRow {
    if xs.is_empty() {
        return SummaryRow {
            file: file.into(),
            column,
            count: 0,
            mean: f64::NAN,
            std: f64::NAN,
            min: f64::NAN,
            max: f64::NAN,
        };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    SummaryRow {
        file: file.into(),
        column,
        count: xs.len(),
        mean,
        std: var.sqrt(),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}
