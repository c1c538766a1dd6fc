use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Specific heat of water, kJ/(kg·K); 1 L ≈ 1 kg.
pub const WATER_HEAT_CAPACITY: f64 = 4.186;

/// Electric water heater with a first-order thermal model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwhConfig {
    pub volume_l: f64,
    pub power_kw: f64,
    pub efficiency: f64,
    /// Standing loss coefficient, W/K.
    pub loss_w_per_k: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Comfort setpoint tracked by the baseline controller.
    pub t_set: f64,
    pub t_init: f64,
    pub t_inlet: f64,
    pub t_ambient: f64,
    /// Hot-water draws per period, L/h.
    pub draws_l_per_h: Vec<f64>,
}

impl EwhConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.volume_l > 0.0) {
            return Err(Error::invalid("water heater volume must be positive"));
        }
        if !(self.power_kw >= 0.0) || !(self.loss_w_per_k >= 0.0) {
            return Err(Error::invalid("water heater power and losses must be non-negative"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid("water heater efficiency must lie in (0, 1]"));
        }
        if !(self.t_min < self.t_max) {
            return Err(Error::invalid("water heater bounds must satisfy t_min < t_max"));
        }
        if self.draws_l_per_h.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::invalid("hot-water draws must be non-negative"));
        }
        Ok(())
    }

    fn thermal_mass(&self) -> f64 {
        self.volume_l * WATER_HEAT_CAPACITY
    }

    /// Temperature after one step from `temp` with duty `u ∈ [0, 1]`.
    pub fn step(&self, temp: f64, u: f64, draw_l_per_h: f64, dt_h: f64) -> f64 {
        let secs = dt_h * 3600.0;
        let heat = self.efficiency * self.power_kw * u * secs;
        let standing = self.loss_w_per_k / 1000.0 * (temp - self.t_ambient) * secs;
        let mixing = draw_l_per_h * dt_h * WATER_HEAT_CAPACITY * (temp - self.t_inlet);
        temp + (heat - standing - mixing) / self.thermal_mass()
    }

    /// Duty that lands exactly on `target` after one step (unclamped).
    pub fn duty_for(&self, temp: f64, target: f64, draw_l_per_h: f64, dt_h: f64) -> f64 {
        let full = self.efficiency * self.power_kw * dt_h * 3600.0 / self.thermal_mass();
        if full <= 0.0 {
            return 0.0;
        }
        let idle = self.step(temp, 0.0, draw_l_per_h, dt_h);
        (target - idle) / full
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwhTrace {
    /// `T + 1` temperatures, starting at the initial one.
    pub temperatures: Vec<f64>,
    /// Periods whose end temperature left `[t_min, t_max]`.
    pub violations: Vec<usize>,
}

/// Simulates the heater under duty cycles `control[t] ∈ [0, 1]` (1 = on for
/// the whole period).
pub fn simulate_ewh(config: &EwhConfig, control: &[f64], dt_h: f64) -> Result<EwhTrace> {
    config.validate()?;
    if !(dt_h > 0.0 && dt_h <= 1.0) {
        return Err(Error::invalid("simulation step must lie in (0, 1] h"));
    }
    if !(config.t_min..=config.t_max).contains(&config.t_init) {
        return Err(Error::invalid("initial water temperature outside bounds"));
    }
    if control.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::invalid("water heater control must lie in [0, 1]"));
    }
    let mut temps = Vec::with_capacity(control.len() + 1);
    temps.push(config.t_init);
    let mut violations = Vec::new();
    for (t, &u) in control.iter().enumerate() {
        let draw = config.draws_l_per_h.get(t).copied().unwrap_or(0.0);
        let next = config.step(temps[t], u, draw, dt_h);
        if next < config.t_min - 1e-9 || next > config.t_max + 1e-9 {
            violations.push(t);
        }
        temps.push(next);
    }
    Ok(EwhTrace { temperatures: temps, violations })
}

/// Stationary battery; SOC in kWh, power positive when charging.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub capacity_kwh: f64,
    pub p_charge_kw: f64,
    pub p_discharge_kw: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_charge_kw >= 0.0 && self.p_discharge_kw >= 0.0 && self.capacity_kwh >= 0.0) {
            return Err(Error::invalid("battery ratings must be non-negative"));
        }
        for eta in [self.eta_charge, self.eta_discharge] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::invalid("battery efficiencies must lie in (0, 1]"));
            }
        }
        if !(self.soc_min <= self.soc_max && self.soc_max <= self.capacity_kwh && self.soc_min >= 0.0) {
            return Err(Error::invalid("battery SOC bounds must satisfy 0 ≤ min ≤ max ≤ capacity"));
        }
        if !(self.soc_min..=self.soc_max).contains(&self.soc_init) {
            return Err(Error::invalid("initial SOC outside bounds"));
        }
        Ok(())
    }

    pub fn step(&self, soc: f64, power_kw: f64, dt_h: f64) -> f64 {
        if power_kw >= 0.0 {
            soc + self.eta_charge * power_kw * dt_h
        } else {
            soc + power_kw * dt_h / self.eta_discharge
        }
    }

    /// Power range reachable from `soc` in one step without leaving the
    /// SOC bounds.
    pub fn power_range(&self, soc: f64, dt_h: f64) -> (f64, f64) {
        let up = ((self.soc_max - soc) / (self.eta_charge * dt_h)).clamp(0.0, self.p_charge_kw);
        let down = ((soc - self.soc_min) * self.eta_discharge / dt_h).clamp(0.0, self.p_discharge_kw);
        (-down, up)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryTrace {
    /// `T + 1` SOC values, starting at the initial one.
    pub soc: Vec<f64>,
    pub violations: Vec<usize>,
}

pub fn simulate_battery(config: &BatteryConfig, schedule_kw: &[f64], dt_h: f64) -> Result<BatteryTrace> {
    config.validate()?;
    if let Some(t) = schedule_kw
        .iter()
        .position(|&p| p > config.p_charge_kw + 1e-9 || p < -config.p_discharge_kw - 1e-9)
    {
        return Err(Error::invalid(format!("battery power at period {t} exceeds its rating")));
    }
    let mut soc = Vec::with_capacity(schedule_kw.len() + 1);
    soc.push(config.soc_init);
    let mut violations = Vec::new();
    for (t, &p) in schedule_kw.iter().enumerate() {
        let next = config.step(soc[t], p, dt_h);
        if next < config.soc_min - 1e-9 || next > config.soc_max + 1e-9 {
            violations.push(t);
        }
        soc.push(next);
    }
    Ok(BatteryTrace { soc, violations })
}

/// Appliance modelled by average power and operating time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shiftable {
    pub name: String,
    pub power_kw: f64,
    /// Whole periods.
    pub duration: usize,
    /// First allowed start period.
    pub earliest_start: usize,
    /// The run must end by this period (exclusive).
    pub latest_end: usize,
    /// Start used when no flexibility is requested.
    pub baseline_start: usize,
}

impl Shiftable {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.power_kw >= 0.0) || self.duration == 0 {
            return Err(Error::invalid(format!("shiftable '{}' needs power ≥ 0 and duration ≥ 1", self.name)));
        }
        if self.latest_end > horizon || self.earliest_start + self.duration > self.latest_end {
            return Err(Error::invalid(format!("shiftable '{}' window cannot fit its run", self.name)));
        }
        if !self.allowed_starts().contains(&self.baseline_start) {
            return Err(Error::invalid(format!("shiftable '{}' baseline start outside window", self.name)));
        }
        Ok(())
    }

    pub fn allowed_starts(&self) -> std::ops::RangeInclusive<usize> {
        self.earliest_start..=self.latest_end - self.duration
    }

    pub fn add_profile(&self, start: usize, scale: f64, out: &mut [f64]) {
        for v in out.iter_mut().skip(start).take(self.duration) {
            *v += scale * self.power_kw;
        }
    }
}

/// Behind-the-meter devices of one household.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceFleet {
    pub ewh: Option<EwhConfig>,
    pub battery: Option<BatteryConfig>,
    pub shiftables: Vec<Shiftable>,
    pub pv_capacity_kw: f64,
    pub dt_h: f64,
}

impl DeviceFleet {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.dt_h > 0.0 && self.dt_h <= 1.0) {
            return Err(Error::invalid("period length must lie in (0, 1] h"));
        }
        if !(self.pv_capacity_kw >= 0.0) {
            return Err(Error::invalid("PV capacity must be non-negative"));
        }
        if let Some(e) = &self.ewh {
            e.validate()?;
        }
        if let Some(b) = &self.battery {
            b.validate()?;
        }
        self.shiftables.iter().try_for_each(|s| s.validate(horizon))
    }

    /// Upper bounds on upward and downward deviation per period.
    pub fn deviation_bounds(&self) -> (f64, f64) {
        let mut up = 0.0;
        let mut down = 0.0;
        if let Some(b) = &self.battery {
            up += b.p_charge_kw;
            down += b.p_discharge_kw;
        }
        if let Some(e) = &self.ewh {
            up += e.power_kw;
            down += e.power_kw;
        }
        let shift: f64 = self.shiftables.iter().map(|s| s.power_kw).sum();
        (up + shift, down + shift)
    }
}
