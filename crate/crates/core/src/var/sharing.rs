use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;

use super::admm::{check_shapes, objective, soft_threshold, AdmmParams, VarModel};
use super::consensus::check_partition;
use super::design::VarDesign;
use super::roundlog::{LogPolicy, RoundLog};
use super::TracePoint;
use crate::error::{Error, Result};

pub(crate) const SHARING_SCHEME: &str = "sharing-examples";

#[derive(Clone, Debug)]
pub struct SharingRun {
    pub model: VarModel,
    pub log: RoundLog,
    /// Sample columns held by each worker.
    pub blocks: Vec<Vec<usize>>,
}

/// Contiguous, near-equal time blocks.
pub fn time_blocks(design: &VarDesign, n_workers: usize) -> Result<Vec<Vec<usize>>> {
    let t = design.n_samples();
    if n_workers == 0 || n_workers > t {
        return Err(Error::invalid(format!("worker count {n_workers} outside 1..={t}")));
    }
    Ok((0..n_workers).map(|w| (w * t / n_workers..(w + 1) * t / n_workers).collect()).collect())
}

struct Worker {
    chol: Cholesky<f64, Dyn>,
    zy: DMatrix<f64>,
    b: DMatrix<f64>,
    u: DMatrix<f64>,
}

/// Example-split (column-block) distributed ADMM.
///
/// Workers solve ridge-type updates `argmin ½‖Y_i − B_i Z_i‖² +
/// (ρ/2)‖B_i − H + U_i‖²` and upload `B_i + U_i`; the hub broadcasts
/// `H = S(avg(B) + avg(U), λ/(Nρ))`.
pub fn fit_sharing_examples(
    design: &VarDesign,
    blocks: &[Vec<usize>],
    params: &AdmmParams,
    policy: LogPolicy,
) -> Result<SharingRun> {
    params.validate()?;
    check_shapes(design)?;
    check_partition(blocks, design.n_samples(), "sample columns")?;
    let (n, np) = (design.n, design.z.nrows());
    let nw = blocks.len();
    let rho = params.rho;

    let mut workers = blocks
        .iter()
        .map(|cols| {
            let y = DMatrix::from_fn(n, cols.len(), |i, j| design.y[(i, cols[j])]);
            let z = DMatrix::from_fn(np, cols.len(), |i, j| design.z[(i, cols[j])]);
            let gram = &z * z.transpose() + DMatrix::identity(np, np) * rho;
            let chol = gram
                .cholesky()
                .ok_or_else(|| Error::invalid("Z_i Z_iᵀ + ρI is not positive definite"))?;
            Ok(Worker { chol, zy: &z * y.transpose(), b: DMatrix::zeros(n, np), u: DMatrix::zeros(n, np) })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut h = DMatrix::zeros(n, np);
    let mut log = RoundLog::new(policy);
    let mut trace = Vec::new();
    let threshold = params.lambda / (nw as f64 * rho);
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut k = 0;

    while k < params.max_iter {
        k += 1;
        workers.par_iter_mut().for_each(|w| {
            let rhs = &w.zy + (&h - &w.u).transpose() * rho;
            w.b = w.chol.solve(&rhs).transpose();
        });
        let uploads: Vec<DMatrix<f64>> = workers.iter().map(|w| &w.b + &w.u).collect();
        let mut sum = DMatrix::zeros(n, np);
        for up in &uploads {
            sum += up;
        }
        let h_prev = std::mem::replace(&mut h, (sum / nw as f64).map(|v| soft_threshold(v, threshold)));
        log.record(k, SHARING_SCHEME, rho, &uploads, vec![("h", &h)]);
        workers.par_iter_mut().for_each(|w| w.u += &w.b - &h);

        primal = workers.iter().map(|w| (&w.b - &h).norm_squared()).sum::<f64>().sqrt();
        dual = rho * (nw as f64).sqrt() * (&h - &h_prev).norm();
        trace.push(TracePoint { k, primal, dual, objective: objective(design, &h, params.lambda) });
        let b_norm = workers.iter().map(|w| w.b.norm_squared()).sum::<f64>().sqrt();
        let u_norm = workers.iter().map(|w| w.u.norm_squared()).sum::<f64>().sqrt();
        let eps_pri = params.tol * b_norm.max((nw as f64).sqrt() * h.norm()).max(1.0);
        let eps_dual = params.tol * (rho * u_norm).max(1.0);
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
    }

    let model = VarModel {
        b: h,
        lambda: params.lambda,
        rho,
        p: design.p,
        means: design.means.clone(),
        iterations: k,
        primal_residual: primal,
        dual_residual: dual,
        converged,
        trace,
    };
    Ok(SharingRun { model, log, blocks: blocks.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::simulate_var;
    use crate::var::{build_var_design, fit_centralized, lambda_max};

    #[test]
    fn matches_centralized_support_and_values() {
        let d = build_var_design(&simulate_var(3, 2, 200, 21).unwrap(), 2).unwrap();
        let params = AdmmParams { lambda: 0.5 * lambda_max(&d), rho: 50.0, tol: 1e-10, max_iter: 50_000 };
        let central = fit_centralized(&d, &params).unwrap();
        for nw in [1, 4] {
            let run = fit_sharing_examples(&d, &time_blocks(&d, nw).unwrap(), &params, LogPolicy::default())
                .unwrap();
            assert!(run.model.converged);
            let rel = (&run.model.b - &central.b).norm() / central.b.norm().max(1.0);
            assert!(rel <= 1e-4, "N={nw}: {rel}");
            let support = |m: &DMatrix<f64>| m.iter().map(|v| *v != 0.0).collect::<Vec<_>>();
            assert_eq!(support(&run.model.b), support(&central.b));
        }
    }

    #[test]
    fn time_blocks_partition() {
        let d = build_var_design(&simulate_var(2, 1, 11, 1).unwrap(), 1).unwrap();
        let b = time_blocks(&d, 3).unwrap();
        assert_eq!(b.iter().map(Vec::len).sum::<usize>(), 10);
        assert_eq!(b[0][0], 0);
        assert!(time_blocks(&d, 0).is_err());
    }
}
