//! Time-series and forecast containers plus the scoring metrics shared by
//! every other module.

mod forecast;
mod metrics;
mod series;

pub use forecast::{uniform_quantile_grid, QuantileForecast};
pub use metrics::{
    apply_mask, crps_from_quantiles, crps_rows, daylight_mask, improvement, mae, metric_report,
    pinball, rmse, MetricReport,
};
pub use series::{PanelSeries, TimeSeries};

use crate::error::{Error, Result};

pub(crate) fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
