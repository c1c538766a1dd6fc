use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};

/// Row-major table of named predictor columns indexed by timestamp.
///
/// Missing entries (edges of lag or window transforms) are stored as NaN
/// and removed by [`FeatureMatrix::drop_incomplete_rows`] before a learner
/// sees the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: Vec<NaiveDateTime>,
    columns: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<NaiveDateTime>, columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows.len() * columns.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len() * columns.len(),
                got: values.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Schema(format!("duplicate column '{dup}'")));
        }
        Ok(Self { rows, columns, values })
    }

    /// Builds from column vectors, all of length `rows.len()`.
    pub fn from_columns(rows: Vec<NaiveDateTime>, cols: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = rows.len();
        for (name, c) in &cols {
            if c.len() != n {
                return Err(Error::Shape(format!("column '{name}' has {} rows, expected {n}", c.len())));
            }
        }
        let mut values = Vec::with_capacity(n * cols.len());
        for r in 0..n {
            values.extend(cols.iter().map(|(_, c)| c[r]));
        }
        Self::new(rows, cols.into_iter().map(|(name, _)| name).collect(), values)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> &[NaiveDateTime] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.n_cols();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n_cols() + c]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column_index(name)?;
        Some((0..self.n_rows()).map(|r| self.get(r, c)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Joins columns of two matrices over identical rows.
    pub fn hconcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.rows != other.rows {
            return Err(Error::Misaligned("feature matrices have different rows".into()));
        }
        if let Some(c) = other.columns.iter().find(|c| self.columns.contains(c)) {
            return Err(Error::Schema(format!("column collision on '{c}'")));
        }
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for r in 0..self.n_rows() {
            values.extend_from_slice(self.row(r));
            values.extend_from_slice(other.row(r));
        }
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        FeatureMatrix::new(self.rows.clone(), columns, values)
    }

    /// Keeps the rows selected by `keep`.
    pub fn select_rows(&self, keep: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(keep.len() * self.n_cols());
        for &r in keep {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: keep.iter().map(|&r| self.rows[r]).collect(),
            columns: self.columns.clone(),
            values,
        }
    }

    /// Indices of rows with every value finite.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&r| self.row(r).iter().all(|v| v.is_finite())).collect()
    }

    pub fn drop_incomplete_rows(&self) -> FeatureMatrix {
        self.select_rows(&self.complete_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn ts(n: usize) -> Vec<NaiveDateTime> {
        let t0 = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..n).map(|h| t0 + chrono::Duration::hours(h as i64)).collect()
    }

    #[test]
    fn collision_is_rejected() {
        let a = FeatureMatrix::from_columns(ts(2), vec![("x".into(), vec![1.0, 2.0])]).unwrap();
        assert!(matches!(a.hconcat(&a), Err(Error::Schema(_))));
        let dup = FeatureMatrix::new(ts(1), vec!["x".into(), "x".into()], vec![1.0, 2.0]);
        assert!(dup.is_err());
    }

    #[test]
    fn incomplete_rows_are_dropped() {
        let m = FeatureMatrix::from_columns(
            ts(3),
            vec![("a".into(), vec![1.0, f64::NAN, 3.0]), ("b".into(), vec![4.0, 5.0, 6.0])],
        )
        .unwrap();
        let d = m.drop_incomplete_rows();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.row(1), &[3.0, 6.0]);
    }
}
