//! Trajectory CSV and JSON sidecar.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back yields bit-identical values.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::ModelSpec;

use super::path::{TemporalPath, Termination};

pub const TEMPORAL_HEADER: [&str; 6] = ["s", "t", "tdot", "a", "clock", "conformal"];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

/// Writes the temporal columns followed by `extra_header` columns whose
/// row values come from `extra(i)` for retained sample `i`.
pub fn write_csv<W: Write>(
    path: &TemporalPath,
    extra_header: &[String],
    extra: impl Fn(usize) -> Vec<f64>,
    out: W,
) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = TEMPORAL_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(extra_header.iter().cloned());
    w.write_record(&header)?;
    for (i, smp) in path.samples.iter().enumerate() {
        let mut row = vec![smp.s(), smp.t(), smp.tdot(), smp.a(), smp.clock, smp.conformal];
        let more = extra(i);
        if more.len() != extra_header.len() {
            return Err(ExportError::Format(format!(
                "row {i} has {} extra values for {} extra columns",
                more.len(),
                extra_header.len()
            )));
        }
        row.extend(more);
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_temporal_csv<W: Write>(path: &TemporalPath, out: W) -> Result<(), ExportError> {
    write_csv(path, &[], |_| Vec::new(), out)
}

/// Column-oriented contents of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Column names starting with `prefix` followed only by digits, in
    /// index order.
    pub fn indexed_columns(&self, prefix: &str) -> Vec<String> {
        let mut cols: Vec<(usize, String)> = self
            .header
            .iter()
            .filter_map(|h| {
                let rest = h.strip_prefix(prefix)?;
                rest.parse::<usize>().ok().map(|k| (k, h.clone()))
            })
            .collect();
        cols.sort();
        cols.into_iter().map(|(_, h)| h).collect()
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<CsvTable, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < TEMPORAL_HEADER.len() || header[..TEMPORAL_HEADER.len()] != TEMPORAL_HEADER {
        return Err(ExportError::Format(format!(
            "expected the header to start with {}",
            TEMPORAL_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| ExportError::Format(format!("row {}: {e}", i + 1)))?);
    }
    Ok(CsvTable { header, rows })
}

/// Run metadata written next to a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub termination: Termination,
    pub model: ModelSpec,
    pub fiber: Option<String>,
    pub sigma: f64,
    pub d: usize,
    pub ds: f64,
    pub s_max: f64,
    pub seed: u64,
    pub thin: usize,
    pub samples: usize,
}

pub fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<(), ExportError> {
    let text = serde_json::to_string_pretty(sidecar)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, ExportError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Conventional sidecar location: `<csv>.json`.
pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::catalog;
    use crate::rng::trajectory_rng;
    use crate::temporal::{simulate_temporal, StepParams, TemporalState};

    #[test]
    fn csv_round_trip_is_exact() {
        let m = catalog("sinh", &[]).unwrap();
        let p = StepParams::new(1.0, 3, 1e-2);
        let path = simulate_temporal(TemporalState::from_tdot(&m, 0.0, 1.0, 2.0), &m, &p, 2.0, 3, &mut trajectory_rng(1, 2));
        let mut buf = Vec::new();
        write_temporal_csv(&path, &mut buf).unwrap();
        let table = read_csv(buf.as_slice()).unwrap();
        assert_eq!(table.header, TEMPORAL_HEADER);
        assert_eq!(table.rows.len(), path.samples.len());
        for (row, smp) in table.rows.iter().zip(&path.samples) {
            assert_eq!(row[0], smp.s());
            assert_eq!(row[2], smp.tdot());
            assert_eq!(row[5], smp.conformal);
        }
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(read_csv("x,y\n1,2\n".as_bytes()).is_err());
    }
}
