//! Forecasting, flexibility modelling and scheduling toolkit for home
//! energy management systems (HEMS).
//!
//! The crate is organised around the pieces a prosumer-side controller
//! needs:
//!
//! * [`data`]: aligned time series, quantile forecasts and the error
//!   metrics used to score them.
//! * [`features`]: seasonal, temporal, spatial and PCA predictors built from
//!   gridded weather forecasts.
//! * [`gbt`]: gradient-boosted regression trees for point and quantile PV
//!   forecasts.
//! * [`var`]: VAR-LASSO estimation with centralized and distributed ADMM,
//!   plus the data-leak demonstrators for the distributed variants.
//! * [`flex`]: device simulators, trajectory sampling and the SVDD and
//!   virtual-battery flexibility surrogates.
//! * [`scheduler`]: day-ahead cost minimisation for shiftable and thermal
//!   loads.
//! * [`hub`]: orchestration behind the `hemskit` command-line tool.

pub mod data;
pub mod error;
pub mod features;
pub mod flex;
pub mod gbt;
pub mod hub;
pub mod scheduler;
pub mod synth;
pub mod var;

pub use error::{Error, Result};
