use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::ensure_finite;
use crate::error::{Error, Result};

/// Levels `step, 2·step, …, 1 − step`; `uniform_quantile_grid(19)` gives
/// 0.05..=0.95.
pub fn uniform_quantile_grid(count: usize) -> Vec<f64> {
    let step = 1.0 / (count as f64 + 1.0);
    (1..=count).map(|i| i as f64 * step).collect()
}

/// Point and quantile PV forecast for a run of lead times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub issue_time: NaiveDateTime,
    /// Lead times in hours.
    pub horizons: Vec<u32>,
    pub quantile_levels: Vec<f64>,
    /// `values[h][q]`, kW.
    pub values: Vec<Vec<f64>>,
    /// kW, one per horizon.
    pub point: Vec<f64>,
}

impl QuantileForecast {
    pub fn new(
        issue_time: NaiveDateTime,
        horizons: Vec<u32>,
        quantile_levels: Vec<f64>,
        values: Vec<Vec<f64>>,
        point: Vec<f64>,
    ) -> Result<Self> {
        check_levels(&quantile_levels)?;
        if values.len() != horizons.len() {
            return Err(Error::LengthMismatch { expected: horizons.len(), got: values.len() });
        }
        if point.len() != horizons.len() {
            return Err(Error::LengthMismatch { expected: horizons.len(), got: point.len() });
        }
        for row in &values {
            if row.len() != quantile_levels.len() {
                return Err(Error::LengthMismatch { expected: quantile_levels.len(), got: row.len() });
            }
            ensure_finite(row, "quantile forecast")?;
        }
        ensure_finite(&point, "point forecast")?;
        Ok(Self { issue_time, horizons, quantile_levels, values, point })
    }

    pub fn len(&self) -> usize {
        self.horizons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.horizons.is_empty()
    }

    /// Sorts each row so quantiles are non-decreasing in level.
    pub fn rearrange(&mut self) {
        for row in &mut self.values {
            row.sort_by(f64::total_cmp);
        }
    }

    /// Clips every value (quantiles and point) into `[lower, upper]`.
    pub fn clip(&mut self, lower: f64, upper: f64) {
        for v in self.values.iter_mut().flatten().chain(self.point.iter_mut()) {
            *v = v.clamp(lower, upper);
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.values.iter().all(|row| row.windows(2).all(|w| w[0] <= w[1]))
    }
}

pub(crate) fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Empty("quantile levels"));
    }
    if levels.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::invalid("quantile levels must lie in (0, 1)"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("quantile levels must be strictly increasing"));
    }
    Ok(())
}
