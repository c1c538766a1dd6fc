use serde::{Deserialize, Serialize};

use super::epso::TrajectorySet;
use super::svdd::Label;
use crate::error::{Error, Result};

/// Box model of a flexibility set: power and SOC envelopes per period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualBattery {
    pub p_max: Vec<f64>,
    pub p_min: Vec<f64>,
    pub soc_max: Vec<f64>,
    pub soc_min: Vec<f64>,
    pub soc_ini: f64,
    pub dt_h: f64,
}

/// `soc_ini + Σ_{τ≤t} x_τ Δt` for every t. Fitting and classification share
/// this routine so generators reproduce their bounds bit for bit.
pub fn cumulative_soc(soc_ini: f64, deltas: &[f64], dt_h: f64) -> Vec<f64> {
    let mut acc = 0.0;
    deltas
        .iter()
        .map(|d| {
            acc += d * dt_h;
            soc_ini + acc
        })
        .collect()
}

/// Tightest power/SOC box containing every trajectory of the set.
pub fn vbattery_fit(set: &TrajectorySet, soc_ini: f64, dt_h: f64) -> Result<VirtualBattery> {
    let rows: Vec<Vec<f64>> = set.trajectories.iter().map(|t| t.deltas.clone()).collect();
    vbattery_fit_rows(&rows, soc_ini, dt_h)
}

pub fn vbattery_fit_rows(rows: &[Vec<f64>], soc_ini: f64, dt_h: f64) -> Result<VirtualBattery> {
    let first = rows.first().ok_or(Error::Empty("trajectory set"))?;
    let horizon = first.len();
    if rows.iter().any(|r| r.len() != horizon) {
        return Err(Error::Shape("trajectories differ in length".into()));
    }
    if !(dt_h > 0.0) || !soc_ini.is_finite() {
        return Err(Error::invalid("period length must be positive and soc_ini finite"));
    }
    let mut vb = VirtualBattery {
        p_max: vec![f64::NEG_INFINITY; horizon],
        p_min: vec![f64::INFINITY; horizon],
        soc_max: vec![f64::NEG_INFINITY; horizon],
        soc_min: vec![f64::INFINITY; horizon],
        soc_ini,
        dt_h,
    };
    for r in rows {
        crate::data::ensure_finite(r, "trajectory")?;
        let soc = cumulative_soc(soc_ini, r, dt_h);
        for t in 0..horizon {
            vb.p_max[t] = vb.p_max[t].max(r[t]);
            vb.p_min[t] = vb.p_min[t].min(r[t]);
            vb.soc_max[t] = vb.soc_max[t].max(soc[t]);
            vb.soc_min[t] = vb.soc_min[t].min(soc[t]);
        }
    }
    Ok(vb)
}

/// Objective minimised by the fit: `Σ soc_max − Σ soc_min + Σ p_max − Σ p_min`.
pub fn vbattery_size(vb: &VirtualBattery) -> f64 {
    vb.soc_max.iter().sum::<f64>() - vb.soc_min.iter().sum::<f64>() + vb.p_max.iter().sum::<f64>()
        - vb.p_min.iter().sum::<f64>()
}

/// Feasible iff power and cumulative SOC stay inside the box (inclusive).
pub fn vbattery_classify(vb: &VirtualBattery, traj: &[f64]) -> Result<Label> {
    if traj.len() != vb.p_max.len() {
        return Err(Error::LengthMismatch { expected: vb.p_max.len(), got: traj.len() });
    }
    let soc = cumulative_soc(vb.soc_ini, traj, vb.dt_h);
    let inside = (0..traj.len()).all(|t| {
        vb.p_min[t] <= traj[t] && traj[t] <= vb.p_max[t] && vb.soc_min[t] <= soc[t] && soc[t] <= vb.soc_max[t]
    });
    Ok(Label::from_feasible(inside))
}
