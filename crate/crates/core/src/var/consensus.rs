use nalgebra::DMatrix;
use rayon::prelude::*;

use super::admm::{check_shapes, objective, soft_threshold, AdmmParams, VarModel};
use super::design::VarDesign;
use super::roundlog::{LogPolicy, RoundLog};
use super::TracePoint;
use crate::error::{Error, Result};

pub(crate) const CONSENSUS_SCHEME: &str = "consensus-predictors";

/// Result of a predictor-split run together with its message log.
#[derive(Clone, Debug)]
pub struct ConsensusRun {
    pub model: VarModel,
    pub log: RoundLog,
    /// Rows of `Z` (columns of `B`) owned by each worker.
    pub blocks: Vec<Vec<usize>>,
}

/// Assigns every lag of series `j` to worker `⌊j·N/n⌋`, so with `N = n`
/// each HEMS owns exactly the lags of its own series.
pub fn node_blocks(design: &VarDesign, n_workers: usize) -> Result<Vec<Vec<usize>>> {
    if n_workers == 0 || n_workers > design.n {
        return Err(Error::invalid(format!("worker count {n_workers} outside 1..={}", design.n)));
    }
    let mut blocks = vec![Vec::new(); n_workers];
    for lag in 1..=design.p {
        for j in 0..design.n {
            blocks[j * n_workers / design.n].push(design.z_row(j, lag));
        }
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    Ok(blocks)
}

pub(crate) fn check_partition(blocks: &[Vec<usize>], total: usize, what: &str) -> Result<()> {
    if blocks.is_empty() || blocks.iter().any(|b| b.is_empty()) {
        return Err(Error::Shape(format!("every worker needs a non-empty block of {what}")));
    }
    let mut seen = vec![false; total];
    for &i in blocks.iter().flatten() {
        if i >= total || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Shape(format!("blocks do not partition the {total} {what}")));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Shape(format!("blocks do not cover all {total} {what}")));
    }
    Ok(())
}

struct Worker {
    rows: Vec<usize>,
    z: DMatrix<f64>,
    gram: DMatrix<f64>,
    b: DMatrix<f64>,
    bz: DMatrix<f64>,
}

const INNER_SWEEPS: usize = 1000;
const INNER_TOL: f64 = 1e-13;

impl Worker {
    /// `argmin (ρ/2)‖V − B_i Z_i‖² + λ‖B_i‖₁` by cyclic coordinate descent,
    /// warm-started at the current block.
    fn update(&mut self, target: &DMatrix<f64>, lambda: f64, rho: f64) {
        let c = target * self.z.transpose();
        let m = self.rows.len();
        let threshold = lambda / rho;
        for r in 0..self.b.nrows() {
            for _ in 0..INNER_SWEEPS {
                let mut max_step: f64 = 0.0;
                let mut max_abs: f64 = 0.0;
                for j in 0..m {
                    let g = self.gram[(j, j)];
                    let old = self.b[(r, j)];
                    let new = if g > 0.0 {
                        let mut acc = c[(r, j)];
                        for l in 0..m {
                            if l != j {
                                acc -= self.gram[(j, l)] * self.b[(r, l)];
                            }
                        }
                        soft_threshold(acc, threshold) / g
                    } else {
                        0.0
                    };
                    self.b[(r, j)] = new;
                    max_step = max_step.max((new - old).abs());
                    max_abs = max_abs.max(new.abs());
                }
                if max_step <= INNER_TOL * max_abs.max(1.0) {
                    break;
                }
            }
        }
        self.bz = &self.b * &self.z;
    }
}

/// Predictor-split (row-block) distributed ADMM.
///
/// Each round, workers solve a local LASSO against the consensus gap
/// `B_i Z_i + H̄ − avg(BZ) − U`, upload `B_i Z_i`, and the hub broadcasts
/// `H̄ = (Y + ρ·avg(BZ) + ρU)/(N + ρ)`, `avg(BZ)` and the updated `U`.
pub fn fit_consensus_predictors(
    design: &VarDesign,
    blocks: &[Vec<usize>],
    params: &AdmmParams,
    policy: LogPolicy,
) -> Result<ConsensusRun> {
    params.validate()?;
    check_shapes(design)?;
    let np = design.z.nrows();
    check_partition(blocks, np, "predictor rows")?;
    let (n, t) = (design.n, design.n_samples());
    let nw = blocks.len();
    let nf = nw as f64;
    let rho = params.rho;

    let mut workers: Vec<Worker> = blocks
        .iter()
        .map(|rows| {
            let z = DMatrix::from_fn(rows.len(), t, |i, j| design.z[(rows[i], j)]);
            let gram = &z * z.transpose();
            Worker { rows: rows.clone(), z, gram, b: DMatrix::zeros(n, rows.len()), bz: DMatrix::zeros(n, t) }
        })
        .collect();

    let mut h_bar = DMatrix::zeros(n, t);
    let mut bz_bar = DMatrix::zeros(n, t);
    let mut u = DMatrix::zeros(n, t);
    let mut log = RoundLog::new(policy);
    let mut trace = Vec::new();
    let mut b_prev = DMatrix::zeros(n, np);
    let (mut primal, mut dual) = (f64::INFINITY, f64::INFINITY);
    let mut converged = false;
    let mut k = 0;

    let stack = |workers: &[Worker]| {
        let mut b = DMatrix::zeros(n, np);
        for w in workers {
            for (j, &row) in w.rows.iter().enumerate() {
                b.set_column(row, &w.b.column(j));
            }
        }
        b
    };

    while k < params.max_iter {
        k += 1;
        let shared = &h_bar - &bz_bar - &u;
        workers.par_iter_mut().for_each(|w| {
            let target = &w.bz + &shared;
            w.update(&target, params.lambda, rho);
        });
        // barrier: all uploads in, aggregate in worker order
        let uploads: Vec<DMatrix<f64>> = workers.iter().map(|w| w.bz.clone()).collect();
        let mut sum = DMatrix::zeros(n, t);
        for up in &uploads {
            sum += up;
        }
        bz_bar = sum / nf;
        h_bar = (&design.y + &bz_bar * rho + &u * rho) / (nf + rho);
        u += &bz_bar - &h_bar;
        log.record(
            k,
            CONSENSUS_SCHEME,
            rho,
            &uploads,
            vec![("h_bar", &h_bar), ("bz_bar", &bz_bar), ("u", &u)],
        );

        let b = stack(&workers);
        primal = (&bz_bar - &h_bar).norm();
        dual = rho * (&b - &b_prev).norm();
        trace.push(TracePoint { k, primal, dual, objective: objective(design, &b, params.lambda) });
        let eps_pri = params.tol * bz_bar.norm().max(h_bar.norm()).max(1.0);
        let eps_dual = params.tol * (rho * b.norm()).max(1.0);
        b_prev = b;
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
    }

    let model = VarModel {
        b: b_prev,
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
    Ok(ConsensusRun { model, log, blocks: blocks.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::simulate_var;
    use crate::var::{build_var_design, fit_centralized, lambda_max};

    fn design() -> VarDesign {
        build_var_design(&simulate_var(3, 2, 200, 11).unwrap(), 2).unwrap()
    }

    #[test]
    fn node_blocks_follow_series_ownership() {
        let d = design();
        let b = node_blocks(&d, 3).unwrap();
        assert_eq!(b, vec![vec![0, 3], vec![1, 4], vec![2, 5]]);
        assert_eq!(node_blocks(&d, 1).unwrap(), vec![vec![0, 1, 2, 3, 4, 5]]);
        assert!(node_blocks(&d, 4).is_err());
    }

    #[test]
    fn rejects_inconsistent_blocks() {
        let d = design();
        let p = AdmmParams::default();
        let policy = LogPolicy::default();
        assert!(matches!(
            fit_consensus_predictors(&d, &[vec![0, 1, 2], vec![2, 3, 4, 5]], &p, policy),
            Err(Error::Shape(_))
        ));
        assert!(fit_consensus_predictors(&d, &[vec![0, 1, 2], vec![3, 4]], &p, policy).is_err());
        assert!(fit_consensus_predictors(&d, &[vec![0, 1, 2, 3, 4, 5, 6]], &p, policy).is_err());
    }

    #[test]
    fn matches_centralized_and_logs_each_round() {
        let d = design();
        let params =
            AdmmParams { lambda: 0.05 * lambda_max(&d), rho: 50.0, tol: 1e-10, max_iter: 20_000 };
        let central = fit_centralized(&d, &params).unwrap();
        for nw in [1, 3] {
            let run = fit_consensus_predictors(&d, &node_blocks(&d, nw).unwrap(), &params, LogPolicy::default())
                .unwrap();
            assert!(run.model.converged, "N={nw} did not converge");
            let rel = (&run.model.b - &central.b).norm() / central.b.norm().max(1.0);
            assert!(rel <= 1e-4, "N={nw}: relative distance {rel}");
            assert_eq!(run.log.records.len(), run.model.iterations);
            assert!(run.log.records.iter().all(|r| r.message_count() == nw + 1));
        }
    }
}
