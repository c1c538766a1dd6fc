use serde::{Deserialize, Serialize};

use super::devices::DeviceFleet;
use crate::error::{Error, Result};

/// Residual power left unallocated below this is treated as matched.
pub const POWER_TOLERANCE: f64 = 1e-6;

/// Deviations from the expected net-load profile, kW per period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlexTrajectory {
    pub deltas: Vec<f64>,
}

impl FlexTrajectory {
    pub fn new(deltas: Vec<f64>) -> Self {
        Self { deltas }
    }

    pub fn zeros(horizon: usize) -> Self {
        Self { deltas: vec![0.0; horizon] }
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    /// Deviation no device could absorb.
    PowerMismatch { residual_kw: f64 },
    /// Water temperature left its comfort band.
    Temperature { temperature: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub scenario: usize,
    pub period: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Fraction of violation-free scenarios.
    pub fraction: f64,
    pub violations: Vec<Violation>,
    /// Per-scenario magnitude of all violations (kW and °C summed).
    pub shortfall: Vec<f64>,
}

/// Device set-points that realise the baseline in one PV scenario.
#[derive(Clone, Debug)]
struct ScenarioBaseline {
    battery_kw: Vec<f64>,
}

/// Precomputed baseline device behaviour for repeated feasibility checks.
///
/// The baseline vector is the expected net load with the battery idle, the
/// water heater tracking its setpoint and every shiftable at its baseline
/// start. In each PV scenario the battery follows a self-consumption policy
/// on the scenario's own net load; a trajectory is a deviation from that.
#[derive(Clone, Debug)]
pub struct FeasibilityContext {
    fleet: DeviceFleet,
    baseline: Vec<f64>,
    pv_scenarios: Vec<Vec<f64>>,
    alpha: f64,
    ewh_duty: Vec<f64>,
    scenarios: Vec<ScenarioBaseline>,
}

impl FeasibilityContext {
    pub fn new(fleet: &DeviceFleet, baseline: &[f64], pv_scenarios: &[Vec<f64>], alpha: f64) -> Result<Self> {
        let horizon = baseline.len();
        if horizon == 0 {
            return Err(Error::Empty("baseline"));
        }
        if pv_scenarios.is_empty() {
            return Err(Error::Empty("PV scenarios"));
        }
        if let Some(s) = pv_scenarios.iter().find(|s| s.len() != horizon) {
            return Err(Error::LengthMismatch { expected: horizon, got: s.len() });
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        crate::data::ensure_finite(baseline, "baseline")?;
        for s in pv_scenarios {
            crate::data::ensure_finite(s, "PV scenario")?;
        }
        fleet.validate(horizon)?;

        let dt = fleet.dt_h;
        let mut ewh_duty = vec![0.0; horizon];
        if let Some(e) = &fleet.ewh {
            let mut temp = e.t_init;
            for (t, u) in ewh_duty.iter_mut().enumerate() {
                let draw = e.draws_l_per_h.get(t).copied().unwrap_or(0.0);
                *u = e.duty_for(temp, e.t_set, draw, dt).clamp(0.0, 1.0);
                temp = e.step(temp, *u, draw, dt);
                if temp < e.t_min - 1e-9 || temp > e.t_max + 1e-9 {
                    return Err(Error::Infeasible(format!(
                        "baseline water temperature {temp:.2} °C leaves its bounds in period {t}"
                    )));
                }
            }
        }

        let n = pv_scenarios.len() as f64;
        let pv_mean: Vec<f64> = (0..horizon).map(|t| pv_scenarios.iter().map(|s| s[t]).sum::<f64>() / n).collect();
        let scenarios = pv_scenarios
            .iter()
            .map(|pv| {
                let mut battery_kw = vec![0.0; horizon];
                if let Some(b) = &fleet.battery {
                    let mut soc = b.soc_init;
                    for t in 0..horizon {
                        let net = baseline[t] + pv_mean[t] - pv[t];
                        let (lo, hi) = b.power_range(soc, dt);
                        battery_kw[t] = (-net).clamp(lo, hi);
                        soc = b.step(soc, battery_kw[t], dt);
                    }
                }
                ScenarioBaseline { battery_kw }
            })
            .collect();

        Ok(Self {
            fleet: fleet.clone(),
            baseline: baseline.to_vec(),
            pv_scenarios: pv_scenarios.to_vec(),
            alpha,
            ewh_duty,
            scenarios,
        })
    }

    pub fn horizon(&self) -> usize {
        self.baseline.len()
    }

    pub fn fleet(&self) -> &DeviceFleet {
        &self.fleet
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn pv_scenarios(&self) -> &[Vec<f64>] {
        &self.pv_scenarios
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Disaggregates `traj` in every scenario and counts the violation-free
    /// ones.
    pub fn check(&self, traj: &FlexTrajectory) -> Result<FeasibilityReport> {
        if traj.len() != self.horizon() {
            return Err(Error::LengthMismatch { expected: self.horizon(), got: traj.len() });
        }
        crate::data::ensure_finite(&traj.deltas, "trajectory")?;
        let mut violations = Vec::new();
        let mut shortfall = Vec::with_capacity(self.scenarios.len());
        let mut ok = 0usize;
        for s in 0..self.scenarios.len() {
            let before = violations.len();
            shortfall.push(self.disaggregate(s, &traj.deltas, &mut violations));
            if violations.len() == before {
                ok += 1;
            }
        }
        let fraction = ok as f64 / self.scenarios.len() as f64;
        Ok(FeasibilityReport { feasible: fraction >= self.alpha - 1e-12, fraction, violations, shortfall })
    }

    fn disaggregate(&self, scenario: usize, deltas: &[f64], out: &mut Vec<Violation>) -> f64 {
        let dt = self.fleet.dt_h;
        let horizon = deltas.len();
        let mut residual = deltas.to_vec();
        let mut magnitude = 0.0;

        if let Some(b) = &self.fleet.battery {
            let base = &self.scenarios[scenario].battery_kw;
            let mut soc = b.soc_init;
            for t in 0..horizon {
                let (lo, hi) = b.power_range(soc, dt);
                let p = (base[t] + residual[t]).clamp(lo, hi);
                residual[t] -= p - base[t];
                soc = b.step(soc, p, dt);
            }
        }

        if let Some(e) = self.fleet.ewh.as_ref().filter(|e| e.power_kw > 0.0) {
            let mut temp = e.t_init;
            for t in 0..horizon {
                let draw = e.draws_l_per_h.get(t).copied().unwrap_or(0.0);
                let lo = e.duty_for(temp, e.t_min, draw, dt).clamp(0.0, 1.0);
                let hi = e.duty_for(temp, e.t_max, draw, dt).clamp(0.0, 1.0);
                let base = self.ewh_duty[t];
                let u = (base + residual[t] / e.power_kw).clamp(lo, hi.max(lo));
                residual[t] -= (u - base) * e.power_kw;
                temp = e.step(temp, u, draw, dt);
                let excess = (e.t_min - temp).max(temp - e.t_max);
                if excess > 1e-9 {
                    magnitude += excess;
                    out.push(Violation { scenario, period: t, kind: ViolationKind::Temperature { temperature: temp } });
                }
            }
        }

        let mut change = vec![0.0; horizon];
        for sh in &self.fleet.shiftables {
            if sh.power_kw == 0.0 {
                continue;
            }
            let current: f64 = residual.iter().map(|r| r.abs()).sum();
            let mut best = (current, sh.baseline_start);
            for start in sh.allowed_starts() {
                if start == sh.baseline_start {
                    continue;
                }
                change.iter_mut().for_each(|c| *c = 0.0);
                sh.add_profile(start, 1.0, &mut change);
                sh.add_profile(sh.baseline_start, -1.0, &mut change);
                let l1: f64 = residual.iter().zip(&change).map(|(r, c)| (r - c).abs()).sum();
                if l1 < best.0 - 1e-12 {
                    best = (l1, start);
                }
            }
            if best.1 != sh.baseline_start {
                sh.add_profile(best.1, -1.0, &mut residual);
                sh.add_profile(sh.baseline_start, 1.0, &mut residual);
            }
        }

        for (t, &r) in residual.iter().enumerate() {
            if r.abs() > POWER_TOLERANCE {
                magnitude += r.abs();
                out.push(Violation { scenario, period: t, kind: ViolationKind::PowerMismatch { residual_kw: r } });
            }
        }
        magnitude
    }
}

/// One-shot feasibility check of `traj` against the fleet's baseline.
pub fn check_feasible(
    traj: &FlexTrajectory,
    fleet: &DeviceFleet,
    baseline: &[f64],
    pv_scenarios: &[Vec<f64>],
    alpha: f64,
) -> Result<FeasibilityReport> {
    FeasibilityContext::new(fleet, baseline, pv_scenarios, alpha)?.check(traj)
}
