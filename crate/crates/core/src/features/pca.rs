use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal components of one NWP variable over the grid points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `n_pc × point`, orthonormal rows.
    pub components: DMatrix<f64>,
    /// Variance captured by each component, non-increasing.
    pub explained_variance: DVector<f64>,
    /// Sum of all eigenvalues of the sample covariance.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn explained_ratio(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.n_components()];
        }
        self.explained_variance.iter().map(|v| v / self.total_variance).collect()
    }
}

/// Fits PCA on `samples` (`time × point`) keeping `n_pc` components.
///
/// Each component's largest-magnitude loading is made positive so the
/// basis is reproducible.
pub fn fit_pca(samples: &DMatrix<f64>, n_pc: usize) -> Result<PcaModel> {
    let (n, p) = samples.shape();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    if n_pc == 0 || n_pc > n.min(p) {
        return Err(Error::invalid(format!("n_pc = {n_pc} outside 1..={}", n.min(p))));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input"));
    }
    let mean = samples.row_mean().transpose();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let total_variance = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut components = DMatrix::zeros(n_pc, p);
    let mut explained = DVector::zeros(n_pc);
    for (k, &idx) in order.iter().take(n_pc).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if pivot < 0.0 {
            v = -v;
        }
        components.set_row(k, &v.transpose());
        explained[k] = eig.eigenvalues[idx].max(0.0);
    }
    Ok(PcaModel { mean, components, explained_variance: explained, total_variance })
}

/// Scores `time × n_pc` of `samples` under `model`.
pub fn apply_pca(model: &PcaModel, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if samples.ncols() != model.mean.len() {
        return Err(Error::Shape(format!(
            "PCA expects {} points, got {}",
            model.mean.len(),
            samples.ncols()
        )));
    }
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= model.mean.transpose();
    }
    Ok(centered * model.components.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn rank_one_data_is_one_component() {
        let a = [1.0, -2.0, 0.5, 3.0, 4.0, -1.0];
        let w = [0.3, 0.9, -0.2, 0.4];
        let x = DMatrix::from_fn(6, 4, |t, p| a[t] * w[p]);
        let m = fit_pca(&x, 3).unwrap();
        assert!((m.explained_ratio()[0] - 1.0).abs() < 1e-10);
        assert!(m.explained_variance[1].abs() < 1e-10);
    }

    #[test]
    fn mean_maps_to_zero_scores() {
        let x = random(20, 5, 1);
        let m = fit_pca(&x, 3).unwrap();
        let s = apply_pca(&m, &DMatrix::from_row_slice(1, 5, m.mean.as_slice())).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn full_rank_reconstruction() {
        let x = random(5, 3, 2);
        let m = fit_pca(&x, 3).unwrap();
        let scores = apply_pca(&m, &x).unwrap();
        let mut rec = scores * &m.components;
        for mut row in rec.row_iter_mut() {
            row += m.mean.transpose();
        }
        assert!((rec - x).abs().max() < 1e-10);
    }

    #[test]
    fn components_orthonormal_and_sorted() {
        let x = random(40, 8, 3);
        let m = fit_pca(&x, 5).unwrap();
        let gram = &m.components * m.components.transpose();
        assert!((gram - DMatrix::identity(5, 5)).abs().max() < 1e-10);
        assert!(m.explained_variance.as_slice().windows(2).all(|w| w[0] >= w[1]));
        for row in m.components.row_iter() {
            let pivot = row.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn scores_do_not_depend_on_row_order() {
        let x = random(30, 4, 4);
        let rev = DMatrix::from_fn(30, 4, |r, c| x[(29 - r, c)]);
        let a = apply_pca(&fit_pca(&x, 2).unwrap(), &x).unwrap();
        let b = apply_pca(&fit_pca(&rev, 2).unwrap(), &x).unwrap();
        assert!((a - b).abs().max() < 1e-9);
    }

    #[test]
    fn rejects_too_many_components() {
        assert!(fit_pca(&random(3, 5, 5), 4).is_err());
        assert!(fit_pca(&random(10, 5, 5), 0).is_err());
    }
}
