use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Dataset, Node, Presorted, RegressionTree, TreeParams};
use crate::data::pinball;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Loss {
    Squared,
    Pinball { q: f64 },
}

impl Loss {
    fn validate(self) -> Result<()> {
        match self {
            Loss::Pinball { q } if !(q > 0.0 && q < 1.0) => {
                Err(Error::invalid(format!("quantile level {q} outside (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    fn value(self, pred: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (y - pred).powi(2),
            Loss::Pinball { q } => pinball(q, pred, y),
        }
    }

    fn negative_gradient(self, pred: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => y - pred,
            Loss::Pinball { q } => {
                if y > pred {
                    q
                } else {
                    q - 1.0
                }
            }
        }
    }

    /// Loss-optimal constant for `residuals` (reorders the slice).
    fn optimal_constant(self, residuals: &mut [f64]) -> f64 {
        if residuals.is_empty() {
            return 0.0;
        }
        match self {
            Loss::Squared => residuals.iter().sum::<f64>() / residuals.len() as f64,
            Loss::Pinball { q } => lower_quantile(residuals, q),
        }
    }
}

/// Smallest sample value whose empirical CDF reaches `q`; minimises the
/// summed pinball loss.
pub(crate) fn lower_quantile(values: &mut [f64], q: f64) -> f64 {
    let n = values.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: 4, learning_rate: 0.1, min_samples_leaf: 5 }
    }
}

/// Additive tree ensemble for one loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub loss: Loss,
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Mean training loss after stage 0 (constant) and after each tree.
    pub train_loss: Vec<f64>,
}

impl GbtEnsemble {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }
}

fn mean_loss(loss: Loss, pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(&p, &t)| loss.value(p, t)).sum::<f64>() / y.len() as f64
}

/// Stagewise boosting on the negative gradient of `loss`.
///
/// Tree structure is grown on the gradient; each leaf is then set to the
/// loss-optimal step for its residuals (mean for squared loss, the
/// q-quantile for pinball loss), which with shrinkage ≤ 1 makes the
/// training loss non-increasing per stage.
pub fn fit_gbt(data: &Dataset<'_>, sorted: &Presorted, y: &[f64], loss: Loss, params: &GbtParams) -> Result<GbtEnsemble> {
    loss.validate()?;
    if y.len() != data.n_rows() {
        return Err(Error::LengthMismatch { expected: data.n_rows(), got: y.len() });
    }
    if y.is_empty() {
        return Err(Error::Empty("training targets"));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::invalid("learning rate must lie in (0, 1]"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training targets"));
    }
    let n = y.len();
    let init = loss.optimal_constant(&mut y.to_vec());
    let mut pred = vec![init; n];
    let mut train_loss = vec![mean_loss(loss, &pred, y)];
    let tree_params = TreeParams { max_depth: params.max_depth, min_samples_leaf: params.min_samples_leaf };
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut grad = vec![0.0; n];

    for _ in 0..params.n_trees {
        for i in 0..n {
            grad[i] = loss.negative_gradient(pred[i], y[i]);
        }
        let (mut tree, leaf_of) = grow_tree(data, sorted, &grad, &tree_params)?;
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes.len()];
        for i in 0..n {
            members[leaf_of[i]].push(y[i] - pred[i]);
        }
        for (node, residuals) in members.iter_mut().enumerate() {
            if matches!(tree.nodes[node], Node::Leaf { .. }) {
                tree.set_leaf(node, loss.optimal_constant(residuals));
            }
        }
        for i in 0..n {
            if let Node::Leaf { value } = tree.nodes[leaf_of[i]] {
                pred[i] += params.learning_rate * value;
            }
        }
        train_loss.push(mean_loss(loss, &pred, y));
        trees.push(tree);
    }
    Ok(GbtEnsemble { loss, init, learning_rate: params.learning_rate, trees, train_loss })
}
