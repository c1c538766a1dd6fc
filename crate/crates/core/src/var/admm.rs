use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::VarDesign;
use super::TracePoint;
use crate::error::{Error, Result};

/// `sign(x)·max(0, |x| − a)`, the proximal map of `a·|x|`.
#[inline]
pub fn soft_threshold(x: f64, a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    if x > a {
        x - a
    } else if x < -a {
        x + a
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub lambda: f64,
    pub rho: f64,
    /// Relative tolerance on primal and dual residuals.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self { lambda: 0.0, rho: 1.0, tol: 1e-6, max_iter: 5000 }
    }
}

impl AdmmParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite and non-negative"));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid("rho must be finite and positive"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::invalid("tolerance and iteration budget must be positive"));
        }
        Ok(())
    }
}

/// Estimated VAR coefficients with convergence diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarModel {
    /// `n × np`, block `ℓ` holds lag `ℓ + 1` coefficients.
    pub b: DMatrix<f64>,
    pub lambda: f64,
    pub rho: f64,
    pub p: usize,
    pub means: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

impl VarModel {
    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn nonzeros(&self) -> usize {
        self.b.iter().filter(|v| **v != 0.0).count()
    }
}

/// `½‖Y − BZ‖²_F + λ‖B‖₁`.
pub fn objective(design: &VarDesign, b: &DMatrix<f64>, lambda: f64) -> f64 {
    let r = &design.y - b * &design.z;
    0.5 * r.norm_squared() + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Smallest λ with an all-zero solution: `max |(Y Zᵀ)_{ij}|`.
pub fn lambda_max(design: &VarDesign) -> f64 {
    (&design.y * design.z.transpose()).amax()
}

pub(crate) fn check_shapes(design: &VarDesign) -> Result<()> {
    if design.y.ncols() != design.z.ncols() {
        return Err(Error::Shape("Y and Z have different sample counts".into()));
    }
    if design.z.nrows() != design.n * design.p || design.y.nrows() != design.n {
        return Err(Error::Shape("design dimensions disagree with n and p".into()));
    }
    Ok(())
}

/// Centralized ADMM for the VAR-LASSO problem.
///
/// The B-step solves `B (ZZᵀ + ρI) = YZᵀ + ρ(H − U)` with a Cholesky factor
/// computed once; the H-step soft-thresholds `B + U` at `λ/ρ`. The sparse
/// iterate `H` is returned.
pub fn fit_centralized(design: &VarDesign, params: &AdmmParams) -> Result<VarModel> {
    params.validate()?;
    check_shapes(design)?;
    let (n, np) = (design.n, design.z.nrows());
    let gram = &design.z * design.z.transpose() + DMatrix::identity(np, np) * params.rho;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::invalid("ZZᵀ + ρI is not positive definite"))?;
    // Bᵀ solves (ZZᵀ+ρI) Bᵀ = ZYᵀ + ρ(H − U)ᵀ
    let zy = &design.z * design.y.transpose();

    let mut h = DMatrix::zeros(n, np);
    let mut u = DMatrix::zeros(n, np);
    let threshold = params.lambda / params.rho;
    let mut trace = Vec::new();
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut k = 0;

    while k < params.max_iter {
        k += 1;
        let rhs = &zy + (&h - &u).transpose() * params.rho;
        let b = chol.solve(&rhs).transpose();
        let h_prev = std::mem::replace(&mut h, (&b + &u).map(|v| soft_threshold(v, threshold)));
        u += &b - &h;

        primal = (&b - &h).norm();
        dual = params.rho * (&h - &h_prev).norm();
        trace.push(TracePoint { k, primal, dual, objective: objective(design, &h, params.lambda) });
        let eps_pri = params.tol * b.norm().max(h.norm()).max(1.0);
        let eps_dual = params.tol * (params.rho * u.norm()).max(1.0);
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
    }
    Ok(VarModel {
        b: h,
        lambda: params.lambda,
        rho: params.rho,
        p: design.p,
        means: design.means.clone(),
        iterations: k,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::simulate_var;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(0.0, 1.0), 0.0);
        for x in [-7.25, -1e-9, 0.3, 123.0] {
            assert_eq!(soft_threshold(x, 0.0), x);
        }
    }

    fn design(n: usize, p: usize, t: usize, seed: u64) -> VarDesign {
        let panel = simulate_var(n, p, t, seed).unwrap();
        crate::var::build_var_design(&panel, p).unwrap()
    }

    #[test]
    fn large_lambda_gives_zero_matrix() {
        let d = design(3, 2, 200, 1);
        let params = AdmmParams { lambda: 1.01 * lambda_max(&d), rho: 50.0, ..Default::default() };
        let m = fit_centralized(&d, &params).unwrap();
        assert!(m.converged);
        assert_eq!(m.nonzeros(), 0);
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let d = design(3, 2, 200, 2);
        let m = fit_centralized(&d, &AdmmParams { lambda: 0.0, rho: 50.0, tol: 1e-10, max_iter: 20_000 })
            .unwrap();
        // normal equations: B = Y Zᵀ (Z Zᵀ)⁻¹ via an LU solve
        let zzt = &d.z * d.z.transpose();
        let ols = zzt.lu().solve(&(&d.z * d.y.transpose())).unwrap().transpose();
        assert!((&m.b - &ols).amax() < 1e-6, "diff {}", (&m.b - &ols).amax());
    }

    #[test]
    fn sparsity_non_increasing_in_lambda() {
        let d = design(4, 2, 300, 3);
        let reference = 0.1 * lambda_max(&d);
        let counts: Vec<usize> = [0.1, 1.0, 10.0]
            .iter()
            .map(|s| {
                let p = AdmmParams { lambda: s * reference, rho: 50.0, tol: 1e-9, max_iter: 20_000 };
                fit_centralized(&d, &p).unwrap().nonzeros()
            })
            .collect();
        assert!(counts[0] >= counts[1] && counts[1] >= counts[2], "{counts:?}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = design(2, 1, 50, 4);
        assert!(fit_centralized(&d, &AdmmParams { lambda: -1.0, ..Default::default() }).is_err());
        assert!(fit_centralized(&d, &AdmmParams { rho: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let d = design(3, 2, 100, 5);
        let m = fit_centralized(&d, &AdmmParams { lambda: 1.0, rho: 1.0, tol: 1e-14, max_iter: 3 }).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
        assert!(m.primal_residual.is_finite());
    }
}
