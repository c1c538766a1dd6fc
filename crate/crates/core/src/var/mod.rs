//! Sparse vector autoregression (VAR-LASSO) estimated by ADMM.
//!
//! Three solvers share one problem, `min ½‖Y − BZ‖²_F + λ‖B‖₁`:
//!
//! * [`fit_centralized`]: plain ADMM with a cached Cholesky factor.
//! * [`fit_consensus_predictors`]: `Z` split by rows, each worker owning the
//!   lags of its own series; the hub aggregates `B_i Z_i`.
//! * [`fit_sharing_examples`]: `Z` split by columns (time blocks), each
//!   worker fitting a full `B_i` on its slice.
//!
//! The distributed solvers run in-process: worker updates execute in
//! parallel between barriers and every exchanged quantity goes through a
//! [`RoundLog`], which the [`privacy`] demonstrators replay.

mod admm;
mod consensus;
mod design;
mod forecast;
mod matrix;
pub mod privacy;
mod roundlog;
mod sharing;

pub use admm::{fit_centralized, lambda_max, objective, soft_threshold, AdmmParams, VarModel};
pub use consensus::{fit_consensus_predictors, node_blocks, ConsensusRun};
pub use design::{build_var_design, VarDesign};
pub use forecast::{forecast_matrix, forecast_var};
pub use matrix::MatrixRecord;
pub use roundlog::{Broadcast, LogPolicy, RoundLog, RoundRecord, Upload};
pub use sharing::{fit_sharing_examples, time_blocks, SharingRun};

/// Convergence diagnostics for one ADMM iteration.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TracePoint {
    pub k: usize,
    pub primal: f64,
    pub dual: f64,
    pub objective: f64,
}
