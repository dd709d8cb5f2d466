//! Dense, column-major design matrix with named features.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A real-valued design matrix, one feature per column.
///
/// Entries are finite, there is at least one row, and column names are
/// unique. Zero columns are allowed so that an empty predictor block (for
/// instance no level-1 predictors) still has a well-defined row count.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "design matrix needs at least 1 row, got {}",
                values.nrows()
            )));
        }
        if names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::with_capacity(names.len());
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate column name `{name}`"
                )));
            }
        }
        for (col, column) in values.column_iter().enumerate() {
            if let Some(row) = column.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: names[col].clone(),
                    row,
                    col,
                });
            }
        }
        Ok(Self { values, names })
    }

    /// Builds a matrix with names `V1`, `V2`, ...
    pub fn with_default_names(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("V{j}")).collect();
        Self::new(values, names)
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>], rows: usize) -> Result<Self> {
        if columns.len() != names.len() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(bad) = columns.iter().position(|c| c.len() != rows) {
            return Err(Error::Dimension(format!(
                "column `{}` has {} rows, expected {rows}",
                names[bad],
                columns[bad].len()
            )));
        }
        let values = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
        Self::new(values, names)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let start = j * self.rows();
        &self.values.as_slice()[start..start + self.rows()]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let values = self.values.select_columns(idx);
        let names = idx.iter().map(|&j| self.names[j].clone()).collect();
        Self { values, names }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        Self::new(self.values.select_rows(idx), self.names.clone())
    }

    /// Column-wise concatenation `[self, other]`.
    pub fn hcat(&self, other: &DesignMatrix) -> Result<Self> {
        if self.rows() != other.rows() {
            return Err(Error::Dimension(format!(
                "cannot concatenate {} rows with {} rows",
                self.rows(),
                other.rows()
            )));
        }
        let mut values = DMatrix::zeros(self.rows(), self.cols() + other.cols());
        values.columns_mut(0, self.cols()).copy_from(&self.values);
        values
            .columns_mut(self.cols(), other.cols())
            .copy_from(&other.values);
        let names = self.names.iter().chain(&other.names).cloned().collect();
        Self::new(values, names)
    }

    /// Returns a copy with every column name passed through `f`.
    pub fn renamed(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Self::new(
            self.values.clone(),
            self.names.iter().map(|n| f(n)).collect(),
        )
    }

    /// True when every entry of column `j` is exactly 0 or 1.
    pub fn is_binary_column(&self, j: usize) -> bool {
        self.column(j).iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}
