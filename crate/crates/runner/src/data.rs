//! Observation files: a `t,y` CSV plus a JSON sidecar describing how the data
//! were generated.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ModelKind;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: row {row} has t = {got}, expected {row}")]
    Gap { path: PathBuf, row: usize, got: usize },
    #[error("{path}: no observations")]
    Empty { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DataSidecar {
    pub model: ModelKind,
    pub true_theta: Vec<f64>,
    pub data_seed: u64,
    pub observations: usize,
}

#[derive(Serialize, Deserialize)]
struct Row {
    t: usize,
    y: f64,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_observations(path: &Path, y: &[f64], sidecar: &DataSidecar) -> Result<(), DataError> {
    let csv_err = |source| DataError::Csv { path: path.to_owned(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (i, &v) in y.iter().enumerate() {
        w.serialize(Row { t: i + 1, y: v }).map_err(csv_err)?;
    }
    w.flush().map_err(|source| DataError::Io { path: path.to_owned(), source })?;

    let side = sidecar_path(path);
    let f = File::create(&side).map_err(|source| DataError::Io { path: side.clone(), source })?;
    serde_json::to_writer_pretty(f, sidecar).map_err(|source| DataError::Json { path: side, source })
}

/// Reads `y_1..y_T`; rows must be numbered `1, 2, …` in order.
pub fn read_observations(path: &Path) -> Result<Vec<f64>, DataError> {
    let csv_err = |source| DataError::Csv { path: path.to_owned(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut y = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row.map_err(csv_err)?;
        if row.t != i + 1 {
            return Err(DataError::Gap { path: path.to_owned(), row: i + 1, got: row.t });
        }
        y.push(row.y);
    }
    if y.is_empty() {
        return Err(DataError::Empty { path: path.to_owned() });
    }
    Ok(y)
}

pub fn read_sidecar(csv: &Path) -> Result<Option<DataSidecar>, DataError> {
    let side = sidecar_path(csv);
    if !side.exists() {
        return Ok(None);
    }
    let f = File::open(&side).map_err(|source| DataError::Io { path: side.clone(), source })?;
    serde_json::from_reader(f).map(Some).map_err(|source| DataError::Json { path: side, source })
}
