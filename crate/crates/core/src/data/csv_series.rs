use std::io::Read;
use std::path::Path;

use crate::data::{Source, Split, Trajectory, TrajectoryDataset, DEFAULT_VALIDATION_FRACTION};
use crate::error::{Error, Result};
use crate::tensor::Vector;

/// What ingestion kept and dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvReport {
    pub kept: Vec<String>,
    /// Columns with a blank or non-numeric cell.
    pub dropped_missing: Vec<String>,
    /// Columns with zero variance.
    pub dropped_constant: Vec<String>,
    /// Per kept column, before normalization.
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub num_rows: usize,
    pub window_len: usize,
    pub stride: usize,
}

impl CsvReport {
    pub fn num_dropped(&self) -> usize {
        self.dropped_missing.len() + self.dropped_constant.len()
    }
}

/// Reads a CSV time series (one row per step, one column per dimension),
/// z-scores every complete column and slices it into windows of
/// `window_len` rows with stride `window_len / 2`. The last windows in time
/// order form the validation split.
pub fn load_csv_series(path: &Path, window_len: usize) -> Result<(TrajectoryDataset, CsvReport)> {
    let f = std::fs::File::open(path)?;
    parse_csv_series(f, window_len)
}

pub fn parse_csv_series<R: Read>(reader: R, window_len: usize) -> Result<(TrajectoryDataset, CsvReport)> {
    if window_len < 2 {
        return Err(Error::InvalidArgument(format!("window length must be at least 2, got {window_len}")));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "missing header row".into(),
        });
    }
    let mut columns: Vec<Option<Vec<f64>>> = vec![Some(Vec::new()); headers.len()];
    let mut num_rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        num_rows += 1;
        for (col, cell) in columns.iter_mut().zip(rec.iter()) {
            if let Some(values) = col {
                match cell.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() => values.push(v),
                    _ => *col = None,
                }
            }
        }
    }
    let mut report = CsvReport {
        kept: Vec::new(),
        dropped_missing: Vec::new(),
        dropped_constant: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
        num_rows,
        window_len,
        stride: (window_len / 2).max(1),
    };
    let mut kept = Vec::new();
    for (name, col) in headers.into_iter().zip(columns) {
        let Some(values) = col else {
            report.dropped_missing.push(name);
            continue;
        };
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 1e-12 * mean.abs().max(1.0)) {
            report.dropped_constant.push(name);
            continue;
        }
        report.kept.push(name);
        report.means.push(mean);
        report.stds.push(std);
        kept.push(values.into_iter().map(|v| (v - mean) / std).collect::<Vec<f64>>());
    }
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no complete non-constant columns ({} with missing data, {} constant)",
            report.dropped_missing.len(),
            report.dropped_constant.len()
        )));
    }
    if num_rows < window_len {
        return Err(Error::InvalidArgument(format!(
            "series has {num_rows} rows, shorter than the window length {window_len}"
        )));
    }
    let rows: Vec<Vector> = (0..num_rows).map(|t| kept.iter().map(|c| c[t]).collect()).collect();
    let trajectories: Vec<Trajectory> = (0..=num_rows - window_len)
        .step_by(report.stride)
        .enumerate()
        .map(|(id, start)| Trajectory {
            id: id as u64,
            observations: rows[start..start + window_len].to_vec(),
        })
        .collect();
    let n = trajectories.len();
    let mut ds = TrajectoryDataset::new(trajectories, Source::Csv, 0.0, 0)?;
    let n_val = if n >= 2 {
        ((DEFAULT_VALIDATION_FRACTION * n as f64).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    for s in &mut ds.split[n - n_val..] {
        *s = Split::Validation;
    }
    Ok((ds, report))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}
