use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Features with binary labels. Rows of `features` all have `n_features`
/// entries; `n_features` is kept separately so empty datasets keep a shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationData {
    n_features: usize,
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl ClassificationData {
    pub fn new(n_features: usize, features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                got: labels.len(),
            });
        }
        for row in &features {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    got: row.len(),
                });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("features", "missing or non-finite value"));
            }
        }
        if labels.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("labels", "missing or non-finite value"));
        }
        Ok(Self {
            n_features,
            features,
            labels,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn check_binary(&self) -> Result<()> {
        match self.labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            Some(row) => Err(Error::NonBinaryLabel {
                row,
                value: self.labels[row],
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn subset(&self, idx: &[usize]) -> Self {
        Self {
            n_features: self.n_features,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// One observed entry of a partially observed matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// A real matrix observed on a subset of cells; unobserved cells are masked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<Cell>,
}

impl MatrixData {
    pub fn new(n_rows: usize, n_cols: usize, cells: Vec<Cell>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::invalid("matrix", "shape must be at least 1x1"));
        }
        let mut seen = vec![false; n_rows * n_cols];
        for c in &cells {
            if c.row >= n_rows || c.col >= n_cols {
                return Err(Error::invalid(
                    "matrix",
                    format!("cell ({}, {}) outside {}x{}", c.row, c.col, n_rows, n_cols),
                ));
            }
            if !c.value.is_finite() {
                return Err(Error::invalid("matrix", format!("cell ({}, {}) is not finite", c.row, c.col)));
            }
            let k = c.row * n_cols + c.col;
            if seen[k] {
                return Err(Error::invalid("matrix", format!("cell ({}, {}) observed twice", c.row, c.col)));
            }
            seen[k] = true;
        }
        Ok(Self { n_rows, n_cols, cells })
    }

    /// Builds the observed cells of a dense matrix from a row-major mask.
    pub fn from_dense(values: &[Vec<f64>], mask: &[Vec<bool>]) -> Result<Self> {
        let n_rows = values.len();
        let n_cols = values.first().map_or(0, Vec::len);
        if mask.len() != n_rows || mask.iter().zip(values).any(|(m, v)| m.len() != v.len() || v.len() != n_cols) {
            return Err(Error::invalid("mask", "shape differs from the matrix"));
        }
        let cells = values
            .iter()
            .zip(mask)
            .enumerate()
            .flat_map(|(i, (row, m))| {
                row.iter()
                    .zip(m)
                    .enumerate()
                    .filter(|(_, (_, &keep))| keep)
                    .map(move |(j, (&value, _))| Cell { row: i, col: j, value })
            })
            .collect();
        Self::new(n_rows, n_cols, cells)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub(crate) fn subset(&self, idx: &[usize]) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            cells: idx.iter().map(|&i| self.cells[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dataset {
    Classification(ClassificationData),
    Matrix(MatrixData),
}

impl Dataset {
    /// Number of observations: rows for classification, observed cells for matrices.
    pub fn len(&self) -> usize {
        match self {
            Dataset::Classification(d) => d.len(),
            Dataset::Matrix(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn subset(&self, idx: &[usize]) -> Self {
        match self {
            Dataset::Classification(d) => Dataset::Classification(d.subset(idx)),
            Dataset::Matrix(d) => Dataset::Matrix(d.subset(idx)),
        }
    }
}
