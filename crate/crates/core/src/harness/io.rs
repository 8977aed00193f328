use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Cell, ClassificationData, Dataset, MatrixData};

/// Expected layout of a CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    /// Feature columns followed by a 0/1 label column.
    Classification,
    /// `i,j,r` triples: row index, column index, value.
    Matrix,
}

const MATRIX_HEADER: [&str; 3] = ["i", "j", "r"];

fn bad_cell(path: &Path, row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::BadCell {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

fn bad_csv(path: &Path, reason: impl Into<String>) -> Error {
    Error::BadCsv {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads a comma-separated file with a header row. Rows are numbered from 1
/// for the first data row in error messages.
pub fn load_csv(path: &Path, schema: Schema) -> Result<Dataset> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| bad_csv(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(bad_csv(path, "missing header row"));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad_csv(path, e.to_string()))?;
        if record.len() != header.len() {
            return Err(bad_csv(
                path,
                format!("row {} has {} fields, header has {}", r + 1, record.len(), header.len()),
            ));
        }
        let values = record
            .iter()
            .zip(&header)
            .map(|(cell, name)| {
                if cell.is_empty() {
                    return Err(bad_cell(path, r + 1, name, "blank cell"));
                }
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad_cell(path, r + 1, name, format!("not a number: {cell:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }

    match schema {
        Schema::Classification => {
            if header.len() < 2 {
                return Err(bad_csv(path, "label column absent: need at least one feature and a label"));
            }
            let n_features = header.len() - 1;
            let (features, labels) = rows
                .into_iter()
                .map(|mut row| {
                    let y = row.pop().expect("row has a label");
                    (row, y)
                })
                .unzip();
            let data = ClassificationData::new(n_features, features, labels)?;
            data.check_binary()?;
            Ok(Dataset::Classification(data))
        }
        Schema::Matrix => {
            if header != MATRIX_HEADER {
                return Err(bad_csv(path, format!("matrix header must be i,j,r, got {}", header.join(","))));
            }
            let mut cells = Vec::with_capacity(rows.len());
            for (r, row) in rows.iter().enumerate() {
                let index = |k: usize| {
                    let v = row[k];
                    if v < 0.0 || v.fract() != 0.0 {
                        Err(bad_cell(path, r + 1, MATRIX_HEADER[k], format!("not a nonnegative integer: {v}")))
                    } else {
                        Ok(v as usize)
                    }
                };
                cells.push(Cell {
                    row: index(0)?,
                    col: index(1)?,
                    value: row[2],
                });
            }
            let n_rows = cells.iter().map(|c| c.row + 1).max().unwrap_or(0);
            let n_cols = cells.iter().map(|c| c.col + 1).max().unwrap_or(0);
            Ok(Dataset::Matrix(MatrixData::new(n_rows, n_cols, cells)?))
        }
    }
}

/// Writes a dataset in the layout [`load_csv`] reads. Feature columns are
/// named `x1..xF` and the label `y`.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| bad_csv(path, e.to_string()))?;
    let io = |e: csv::Error| bad_csv(path, e.to_string());
    match data {
        Dataset::Classification(d) => {
            let mut header: Vec<String> = (1..=d.n_features()).map(|k| format!("x{k}")).collect();
            header.push("y".into());
            w.write_record(&header).map_err(io)?;
            for (x, y) in d.features().iter().zip(d.labels()) {
                let row: Vec<String> = x.iter().chain(std::iter::once(y)).map(f64::to_string).collect();
                w.write_record(&row).map_err(io)?;
            }
        }
        Dataset::Matrix(d) => {
            w.write_record(MATRIX_HEADER).map_err(io)?;
            for c in d.cells() {
                w.write_record([c.row.to_string(), c.col.to_string(), c.value.to_string()])
                    .map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
