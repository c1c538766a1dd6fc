//! Predictor construction from gridded NWP forecasts and calendar data.
//!
//! Three nested designs are supported: `Base` (calendar + central grid
//! point), `Temporal` (adds lags, leads, centered variances and the
//! previous NWP run) and `Full` (adds spatial statistics and per-variable
//! principal components over the grid).

mod design;
mod matrix;
mod nwp;
mod pca;
mod transforms;

pub use design::{assemble_design, fit_grid_pca, DesignInputs, GridPca, ModelKind};
pub use matrix::FeatureMatrix;
pub use nwp::{NwpGrid, NwpVariable};
pub use pca::{apply_pca, fit_pca, PcaModel};
pub use transforms::{
    idw_average, seasonal_features, spatial_features, spatial_std, temporal_features,
    TemporalConfig,
};
