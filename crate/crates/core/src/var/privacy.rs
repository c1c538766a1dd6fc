//! Demonstrators showing that the plain distributed splittings leak the
//! participants' data.
//!
//! With the predictor split, any participant that receives the hub's
//! broadcast `(H̄, avg(BZ), U)` can invert the H̄-update and recover the full
//! response matrix `Y`. With the example split, every worker needs lags of
//! all series, so raw data crosses node boundaries before any optimisation
//! takes place.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::consensus::CONSENSUS_SCHEME;
use super::design::VarDesign;
use super::roundlog::RoundLog;
use crate::error::{Error, Result};

/// Recovers `Y = (N + ρ)·H̄ᵏ − ρ·avg(BZ)ᵏ − ρ·Uᵏ⁻¹` from the broadcasts of
/// rounds `k` and `k − 1` of a predictor-split run (`U⁰ = 0`).
///
/// Only broadcast values are used, i.e. what every participating HEMS
/// (and the hub itself) observes.
pub fn curious_node_reconstruct(log: &RoundLog, round: usize) -> Result<DMatrix<f64>> {
    let rec = log
        .round(round)
        .ok_or_else(|| Error::invalid(format!("round {round} not in log")))?;
    if rec.scheme != CONSENSUS_SCHEME {
        return Err(Error::invalid(format!("reconstruction needs a {CONSENSUS_SCHEME} log")));
    }
    let h_bar = rec.payload_matrix("h_bar")?;
    let bz_bar = rec.payload_matrix("bz_bar")?;
    let u_prev = if round == 1 {
        DMatrix::zeros(h_bar.nrows(), h_bar.ncols())
    } else {
        log.round(round - 1)
            .ok_or_else(|| Error::invalid(format!("round {} not in log", round - 1)))?
            .payload_matrix("u")?
    };
    let n = rec.n_workers as f64;
    let rho = rec.rho;
    Ok(h_bar * (n + rho) - bz_bar * rho - u_prev * rho)
}

/// Raw series a worker receives beyond its host's own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub worker: usize,
    pub host: usize,
    pub foreign_series: Vec<usize>,
}

/// Which raw inputs each worker needs under the example split, assuming
/// worker `w` runs on HEMS `w mod n`.
pub fn audit_sharing_inputs(design: &VarDesign, blocks: &[Vec<usize>]) -> Vec<Exposure> {
    blocks
        .iter()
        .enumerate()
        .filter_map(|(w, cols)| {
            let host = w % design.n;
            // Y_i and Z_i carry a time slice of every series
            let foreign: Vec<usize> = if cols.is_empty() {
                Vec::new()
            } else {
                (0..design.n).filter(|&j| j != host).collect()
            };
            (!foreign.is_empty()).then_some(Exposure { worker: w, host, foreign_series: foreign })
        })
        .collect()
}

/// Under the predictor split a worker only touches its own `Z` rows; flags
/// workers whose block mixes series.
pub fn audit_consensus_inputs(design: &VarDesign, blocks: &[Vec<usize>]) -> Vec<Exposure> {
    blocks
        .iter()
        .enumerate()
        .filter_map(|(w, rows)| {
            let mut series: Vec<usize> = rows.iter().map(|r| r % design.n).collect();
            series.sort_unstable();
            series.dedup();
            let host = *series.first()?;
            let foreign: Vec<usize> = series.into_iter().filter(|&s| s != host).collect();
            (!foreign.is_empty()).then_some(Exposure { worker: w, host, foreign_series: foreign })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub scheme: String,
    pub round: Option<usize>,
    pub reconstruction_max_error: Option<f64>,
    pub raw_exposures: Vec<Exposure>,
    pub verdict: String,
}

const LEAK_TOLERANCE: f64 = 1e-8;

/// Replays the last logged round of a predictor-split run.
pub fn consensus_report(log: &RoundLog, design: &VarDesign, blocks: &[Vec<usize>]) -> Result<PrivacyReport> {
    let last = log.last().ok_or_else(|| Error::Empty("round log"))?.k;
    let y_hat = curious_node_reconstruct(log, last)?;
    let err = (&y_hat - &design.y).amax();
    let exposures = audit_consensus_inputs(design, blocks);
    let leaks = err <= LEAK_TOLERANCE || !exposures.is_empty();
    Ok(PrivacyReport {
        scheme: CONSENSUS_SCHEME.into(),
        round: Some(last),
        reconstruction_max_error: Some(err),
        raw_exposures: exposures,
        verdict: if leaks { "leaks".into() } else { "no leak detected".into() },
    })
}

pub fn sharing_report(design: &VarDesign, blocks: &[Vec<usize>]) -> PrivacyReport {
    let exposures = audit_sharing_inputs(design, blocks);
    let verdict = if exposures.is_empty() { "no leak detected" } else { "leaks" };
    PrivacyReport {
        scheme: super::sharing::SHARING_SCHEME.into(),
        round: None,
        reconstruction_max_error: None,
        raw_exposures: exposures,
        verdict: verdict.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::simulate_var;
    use crate::var::{
        build_var_design, fit_consensus_predictors, lambda_max, node_blocks, time_blocks, AdmmParams,
        LogPolicy,
    };

    fn run(nw: usize) -> (VarDesign, crate::var::ConsensusRun) {
        let d = build_var_design(&simulate_var(3, 1, 120, 5).unwrap(), 1).unwrap();
        let params = AdmmParams { lambda: 0.1 * lambda_max(&d), rho: 20.0, tol: 1e-9, max_iter: 10_000 };
        let r = fit_consensus_predictors(&d, &node_blocks(&d, nw).unwrap(), &params, LogPolicy::Full).unwrap();
        (d, r)
    }

    #[test]
    fn broadcasts_reveal_y_in_every_round() {
        let (d, r) = run(3);
        for k in [1, 2, r.model.iterations / 2, r.model.iterations] {
            let y = curious_node_reconstruct(&r.log, k).unwrap();
            assert!((&y - &d.y).amax() <= 1e-8, "round {k}");
        }
        // same quantity from one round: Y = N·H̄ᵏ − ρ·Uᵏ
        let last = r.log.last().unwrap();
        let alt = last.payload_matrix("h_bar").unwrap() * 3.0 - last.payload_matrix("u").unwrap() * last.rho;
        assert!((&alt - &d.y).amax() <= 1e-8);
    }

    #[test]
    fn single_worker_also_leaks() {
        let (d, r) = run(1);
        let rep = consensus_report(&r.log, &d, &r.blocks).unwrap();
        assert!(rep.reconstruction_max_error.unwrap() <= 1e-8);
        assert_eq!(rep.verdict, "leaks");
    }

    #[test]
    fn missing_round_is_an_error() {
        let d = build_var_design(&simulate_var(2, 1, 60, 6).unwrap(), 1).unwrap();
        let params = AdmmParams { lambda: 0.1, rho: 10.0, tol: 1e-12, max_iter: 10 };
        let r = fit_consensus_predictors(&d, &node_blocks(&d, 2).unwrap(), &params, LogPolicy::LastRounds(2))
            .unwrap();
        assert!(curious_node_reconstruct(&r.log, 5).is_err());
        assert!(curious_node_reconstruct(&r.log, 10).is_ok());
        assert!(curious_node_reconstruct(&r.log, 99).is_err());
    }

    #[test]
    fn example_split_ships_foreign_lags() {
        let d = build_var_design(&simulate_var(3, 2, 90, 7).unwrap(), 2).unwrap();
        let rep = sharing_report(&d, &time_blocks(&d, 3).unwrap());
        assert_eq!(rep.verdict, "leaks");
        assert_eq!(rep.raw_exposures.len(), 3);
        assert_eq!(rep.raw_exposures[0].foreign_series, vec![1, 2]);
        assert!(audit_consensus_inputs(&d, &node_blocks(&d, 3).unwrap()).is_empty());
    }
}
