use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boost::{fit_gbt, GbtEnsemble, GbtParams, Loss};
use super::tree::{Dataset, Presorted};
use crate::data::QuantileForecast;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// One ensemble per quantile level plus a squared-loss point ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileGbtModel {
    pub columns: Vec<String>,
    pub quantile_levels: Vec<f64>,
    pub ensembles: Vec<GbtEnsemble>,
    pub point: GbtEnsemble,
    /// Plant capacity (kW); predictions are clipped to `[0, capacity]`.
    pub capacity: f64,
}

/// Trains the point ensemble and one pinball ensemble per level, in
/// parallel. Results do not depend on thread scheduling.
pub fn fit_quantile_gbt(
    x: &FeatureMatrix,
    y: &[f64],
    quantile_levels: &[f64],
    params: &GbtParams,
    capacity: f64,
) -> Result<QuantileGbtModel> {
    if quantile_levels.is_empty() || quantile_levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("quantile levels must be non-empty and strictly increasing"));
    }
    if !(capacity > 0.0) {
        return Err(Error::invalid("plant capacity must be positive"));
    }
    let data = Dataset::from_features(x)?;
    let sorted = Presorted::new(&data);
    let losses: Vec<Loss> = std::iter::once(Loss::Squared)
        .chain(quantile_levels.iter().map(|&q| Loss::Pinball { q }))
        .collect();
    let mut fitted = losses
        .par_iter()
        .map(|&loss| fit_gbt(&data, &sorted, y, loss, params))
        .collect::<Result<Vec<_>>>()?;
    let point = fitted.remove(0);
    Ok(QuantileGbtModel {
        columns: x.columns().to_vec(),
        quantile_levels: quantile_levels.to_vec(),
        ensembles: fitted,
        point,
        capacity,
    })
}

/// Predicts every row of `x` (one row per horizon), repairs quantile
/// crossing by sorting each row and clips into `[0, capacity]`.
pub fn predict_quantiles(
    model: &QuantileGbtModel,
    x: &FeatureMatrix,
    issue_time: NaiveDateTime,
    horizons: Vec<u32>,
) -> Result<QuantileForecast> {
    if x.columns() != model.columns.as_slice() {
        return Err(Error::Schema(format!(
            "feature columns differ from training schema ({} vs {} columns)",
            x.n_cols(),
            model.columns.len()
        )));
    }
    if horizons.len() != x.n_rows() {
        return Err(Error::LengthMismatch { expected: x.n_rows(), got: horizons.len() });
    }
    let values = (0..x.n_rows())
        .map(|r| model.ensembles.iter().map(|e| e.predict(x.row(r))).collect())
        .collect();
    let point = (0..x.n_rows()).map(|r| model.point.predict(x.row(r))).collect();
    let mut fc = QuantileForecast::new(issue_time, horizons, model.quantile_levels.clone(), values, point)?;
    fc.rearrange();
    fc.clip(0.0, model.capacity);
    Ok(fc)
}
