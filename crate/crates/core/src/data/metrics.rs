use serde::{Deserialize, Serialize};

use super::ensure_finite;
use super::forecast::{check_levels, QuantileForecast};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    pub crps: f64,
    pub n_samples: usize,
}

fn check_pair(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.is_empty() || obs.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    if pred.len() != obs.len() {
        return Err(Error::LengthMismatch { expected: obs.len(), got: pred.len() });
    }
    ensure_finite(pred, "prediction")?;
    ensure_finite(obs, "observation")
}

pub fn mae(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_pair(pred, obs)?;
    let sum: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).abs()).sum();
    Ok(sum / pred.len() as f64)
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_pair(pred, obs)?;
    let sum: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// Pinball (quantile) loss of forecast `x` at level `q` for outcome `y`.
#[inline]
pub fn pinball(q: f64, x: f64, y: f64) -> f64 {
    if y >= x {
        q * (y - x)
    } else {
        (1.0 - q) * (x - y)
    }
}

fn check_uniform_grid(levels: &[f64]) -> Result<()> {
    check_levels(levels)?;
    let q = levels.len();
    let step = 1.0 / (q as f64 + 1.0);
    let uniform = levels
        .iter()
        .enumerate()
        .all(|(i, &l)| (l - (i + 1) as f64 * step).abs() < 1e-9);
    if !uniform {
        return Err(Error::invalid("CRPS needs a uniform quantile grid over (0, 1)"));
    }
    Ok(())
}

/// CRPS approximated by `(2/Q)·Σ_q pinball_q`, averaged over rows.
///
/// `rows[s]` holds the quantiles for sample `s`, `obs[s]` its outcome.
pub fn crps_rows(levels: &[f64], rows: &[Vec<f64>], obs: &[f64]) -> Result<f64> {
    check_uniform_grid(levels)?;
    if rows.is_empty() {
        return Err(Error::Empty("forecast rows"));
    }
    if rows.len() != obs.len() {
        return Err(Error::LengthMismatch { expected: rows.len(), got: obs.len() });
    }
    ensure_finite(obs, "observation")?;
    let scale = 2.0 / levels.len() as f64;
    let mut total = 0.0;
    for (row, &y) in rows.iter().zip(obs) {
        if row.len() != levels.len() {
            return Err(Error::LengthMismatch { expected: levels.len(), got: row.len() });
        }
        if row.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("quantile values must be non-decreasing"));
        }
        total += scale * levels.iter().zip(row).map(|(&q, &x)| pinball(q, x, y)).sum::<f64>();
    }
    Ok(total / rows.len() as f64)
}

pub fn crps_from_quantiles(fc: &QuantileForecast, obs: &[f64]) -> Result<f64> {
    crps_rows(&fc.quantile_levels, &fc.values, obs)
}

/// `(1 − model/base) × 100`.
pub fn improvement(eps_model: f64, eps_base: f64) -> Result<f64> {
    if !(eps_base > 0.0) {
        return Err(Error::invalid("base score must be positive"));
    }
    Ok(100.0 * (eps_base - eps_model) / eps_base)
}

/// Periods with positive clear-sky production; night hours are dropped
/// before scoring PV forecasts.
pub fn daylight_mask(clear_sky: &[f64]) -> Vec<bool> {
    clear_sky.iter().map(|&c| c > 0.0).collect()
}

pub fn apply_mask<T: Clone>(values: &[T], mask: &[bool]) -> Result<Vec<T>> {
    if values.len() != mask.len() {
        return Err(Error::LengthMismatch { expected: mask.len(), got: values.len() });
    }
    Ok(values.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v.clone()).collect())
}

pub fn metric_report(
    point: &[f64],
    levels: &[f64],
    quantiles: &[Vec<f64>],
    obs: &[f64],
) -> Result<MetricReport> {
    let mae = mae(point, obs)?;
    let rmse = rmse(point, obs)?;
    let crps = crps_rows(levels, quantiles, obs)?;
    debug_assert!(rmse + 1e-12 >= mae);
    Ok(MetricReport { mae, rmse, crps, n_samples: obs.len() })
}
