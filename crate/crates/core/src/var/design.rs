use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::PanelSeries;
use crate::error::{Error, Result};

/// Response and lagged-regressor matrices of a centered VAR(p).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarDesign {
    /// `n × T`, column `t` is the centered panel at time `p + t`.
    pub y: DMatrix<f64>,
    /// `np × T`, column `t` stacks `(Y_{t−1}, …, Y_{t−p})`.
    pub z: DMatrix<f64>,
    pub p: usize,
    pub n: usize,
    /// Per-series training means removed before stacking.
    pub means: DVector<f64>,
}

impl VarDesign {
    pub fn n_samples(&self) -> usize {
        self.y.ncols()
    }

    /// Builds the design from an already centered `n × len` matrix.
    pub fn from_centered(centered: &DMatrix<f64>, p: usize, means: DVector<f64>) -> Result<Self> {
        let (n, len) = centered.shape();
        if p == 0 {
            return Err(Error::invalid("lag order must be at least 1"));
        }
        if len < p + 1 {
            return Err(Error::invalid(format!("series of length {len} too short for p = {p}")));
        }
        let t_eff = len - p;
        let y = centered.columns(p, t_eff).into_owned();
        let mut z = DMatrix::zeros(n * p, t_eff);
        for lag in 1..=p {
            z.rows_mut((lag - 1) * n, n).copy_from(&centered.columns(p - lag, t_eff));
        }
        Ok(Self { y, z, p, n, means })
    }

    /// Row of `Z` holding lag `lag` (1-based) of series `series`.
    pub fn z_row(&self, series: usize, lag: usize) -> usize {
        (lag - 1) * self.n + series
    }
}

/// Centers each series on its mean and stacks `p` lags.
pub fn build_var_design(panel: &PanelSeries, p: usize) -> Result<VarDesign> {
    let raw = panel.to_matrix();
    let means = DVector::from_iterator(raw.nrows(), raw.row_iter().map(|r| r.mean()));
    let mut centered = raw;
    for (i, mut row) in centered.row_iter_mut().enumerate() {
        row.add_scalar_mut(-means[i]);
    }
    VarDesign::from_centered(&centered, p, means)
}
