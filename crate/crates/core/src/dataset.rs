use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Observations stored row-wise (`n × d`) with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DMatrix<f64>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(y: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != y.nrows() {
                return Err(Error::Dimension {
                    expected: y.nrows(),
                    got: l.len(),
                    context: "label count",
                });
            }
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % y.nrows(), pos / y.nrows());
            return Err(Error::Invalid(format!(
                "non-finite value at row {row}, column {col}"
            )));
        }
        Ok(Dataset { y, labels })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.y.row(i).transpose()
    }

    /// Rows as owned column vectors, convenient for per-observation work.
    pub fn rows(&self) -> Vec<DVector<f64>> {
        (0..self.n()).map(|i| self.row(i)).collect()
    }
}
