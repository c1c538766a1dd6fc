use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Row-major matrix as written to JSON artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "matrix record {}×{} carries {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl From<&DMatrix<f64>> for MatrixRecord {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            data.extend(m.row(r).iter());
        }
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }
}

/// SHA-256 over the shape and little-endian row-major values.
pub(crate) fn digest(m: &DMatrix<f64>) -> String {
    let mut h = Sha256::new();
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for r in 0..m.nrows() {
        for v in m.row(r).iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
