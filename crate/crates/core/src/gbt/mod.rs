//! Gradient-boosted regression trees for point (squared loss) and quantile
//! (pinball loss) forecasts.

mod boost;
mod quantile;
mod tree;

pub use boost::{fit_gbt, GbtEnsemble, GbtParams, Loss};
pub use quantile::{fit_quantile_gbt, predict_quantiles, QuantileGbtModel};
pub use tree::{fit_tree, Dataset, Node, Presorted, RegressionTree, TreeParams};
